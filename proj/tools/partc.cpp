#include <charconv>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "partc/machine.hpp"
#include "partc/pipeline.hpp"
#include "partc/trace.hpp"

namespace fs = std::filesystem;
using namespace partc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPolicy = 2;
constexpr int kExitFormat = 3;
constexpr int kExitFault = 4;

int exit_code_for(const Error& e) { return is_format_error(e.code()) ? kExitFormat : kExitPolicy; }

void print_error(const Error& e) {
    std::cerr << "error " << to_string(e.code());
    if (e.loc().known()) std::cerr << " " << e.loc().to_string();
    std::cerr << " " << e.message() << "\n";
}

std::vector<SourceFile> load_sources(const std::vector<std::string>& paths) {
    std::vector<SourceFile> out;
    for (const auto& p : paths) out.push_back(load_source(p));
    return out;
}

bool parse_address(std::string_view text, uint64_t& out) {
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        text.remove_prefix(2);
        base = 16;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out, base);
    return !text.empty() && ec == std::errc() && ptr == text.data() + text.size();
}

int cmd_check(const std::vector<std::string>& paths) {
    const auto sources = load_sources(paths);
    const CheckResult r = check_sources(sources);
    if (!r.report.ok()) {
        std::cout << r.report.to_string();
        return kExitPolicy;
    }
    std::cout << "ok " << r.lowered.policy.partitions.size() << " partitions, " << r.lowered.index.variables.size()
              << " variables, " << r.lowered.index.statements.size() << " statements\n";
    return kExitOk;
}

int cmd_build(const std::vector<std::string>& paths, const std::string& out_dir) {
    const auto sources = load_sources(paths);
    BuildArtifact a = build_program(sources);
    write_artifact(a, out_dir);
    std::cout << "switch sites: " << a.instrumented.switch_site_count << "\n";
    return kExitOk;
}

int cmd_run(const std::string& dir, const std::string& input, const std::string& input_file,
            const std::string& trace_path, const std::string& entry) {
    LoadedArtifact a = load_artifact(dir);
    std::string bytes = input_file.empty() ? input : read_file(input_file);
    Machine m = Machine::init(a.layout, a.policy, a.keys, entry);
    m.load(a.module);
    const std::vector<uint8_t> data(bytes.begin(), bytes.end());
    RunResult r = m.run(a.module, entry, data);
    const fs::path trace_file = trace_path.empty() ? fs::path(dir) / "trace.txt" : fs::path(trace_path);
    write_file(trace_file, m.trace().to_text());
    if (r.fault) {
        std::cerr << "fault " << r.fault->describe() << "\n";
        std::cout << "trace: " << trace_file.string() << "\n";
        return kExitFault;
    }
    std::cout << (r.halted ? "halted" : "returned " + std::to_string(r.return_value.value_or(0)))
              << " wrpkru=" << m.wrpkru_count() << "\n";
    std::cout << "trace: " << trace_file.string() << "\n";
    return kExitOk;
}

int cmd_attack(const std::string& dir, const std::string& partition, const std::string& op,
               const std::string& range) {
    LoadedArtifact a = load_artifact(dir);
    const PartitionId* p = a.policy.find_partition(partition);
    if (p == nullptr) {
        std::cerr << "error UnknownPartition unknown partition '" << partition << "'\n";
        return kExitPolicy;
    }
    const size_t dots = range.find("..");
    uint64_t begin = 0;
    uint64_t end = 0;
    if (dots == std::string::npos || !parse_address(std::string_view(range).substr(0, dots), begin) ||
        !parse_address(std::string_view(range).substr(dots + 2), end) || end < begin) {
        std::cerr << "error usage range must look like 0xA..0xB\n";
        return kExitPolicy;
    }
    Machine m = Machine::init(a.layout, a.policy, a.keys);
    m.load(a.module);
    const AttackReport report = m.attack(p->label, op == "write" ? AttackOp::Write : AttackOp::Read, begin, end);
    std::cout << report.to_json() << "\n";
    return kExitOk;
}

int cmd_stats(const std::string& trace_path) {
    const Trace trace = parse_trace(read_file(trace_path));
    std::cout << compute_stats(trace).to_text();
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"partc: privilege-separation policy compiler and simulated-MPK runner"};
    app.require_subcommand(1);

    std::vector<std::string> paths;
    std::string out_dir;
    std::string dir;
    std::string input;
    std::string input_file;
    std::string trace_path;
    std::string entry = "main";
    std::string partition;
    std::string op = "read";
    std::string range;

    auto* check = app.add_subcommand("check", "Parse, lower and validate the policy");
    check->add_option("sources", paths, "Source files (.pml)")->required();

    auto* build = app.add_subcommand("build", "Compile and instrument; write module.ir, layout.json, policy.json");
    build->add_option("sources", paths, "Source files (.pml)")->required();
    build->add_option("--out", out_dir, "Output directory")->required();

    auto* run = app.add_subcommand("run", "Execute a built artifact on the simulated machine");
    run->add_option("dir", dir, "Artifact directory")->required();
    auto* input_opt = run->add_option("--input", input, "Input bytes, given literally");
    run->add_option("--input-file", input_file, "Read input bytes from a file")->excludes(input_opt);
    run->add_option("--trace", trace_path, "Trace output path (default: <dir>/trace.txt)");
    run->add_option("--entry", entry, "Entry function");

    auto* attack = app.add_subcommand("attack", "Sweep an address range with an arbitrary read/write primitive");
    attack->add_option("dir", dir, "Artifact directory")->required();
    attack->add_option("--partition", partition, "Acting partition (name or label)")->required();
    attack->add_option("--op", op, "read or write")->check(CLI::IsMember({"read", "write"}));
    attack->add_option("--range", range, "Half-open range 0xA..0xB")->required();

    auto* stats = app.add_subcommand("stats", "Summarize a trace file");
    stats->add_option("--trace,trace", trace_path, "Trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitPolicy;
    }

    try {
        if (*check) return cmd_check(paths);
        if (*build) return cmd_build(paths, out_dir);
        if (*run) return cmd_run(dir, input, input_file, trace_path, entry);
        if (*attack) return cmd_attack(dir, partition, op, range);
        if (*stats) return cmd_stats(trace_path);
    } catch (const Error& e) {
        print_error(e);
        return exit_code_for(e);
    } catch (const MachineFault& f) {
        std::cerr << "fault " << f.fault().describe() << "\n";
        return kExitFault;
    } catch (const std::exception& e) {
        std::cerr << "error " << e.what() << "\n";
        return kExitFormat;
    }
    return kExitPolicy;
}
