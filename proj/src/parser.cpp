#include "partc/parser.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <set>

namespace partc {

namespace {

using namespace ast;

enum class Tok { Ident, Int, String, Punct, Hash, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    uint64_t int_value = 0;
    std::vector<uint8_t> bytes;
    SourceLoc loc;
};

class Lexer {
  public:
    Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token tok;
            tok.loc = here();
            if (pos_ >= text_.size()) {
                tok.kind = Tok::End;
                out.push_back(tok);
                return out;
            }
            char c = text_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                tok.kind = Tok::Ident;
                while (pos_ < text_.size() &&
                       (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                    tok.text += advance();
                }
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                tok.kind = Tok::Int;
                lex_int(tok);
            } else if (c == '"') {
                tok.kind = Tok::String;
                lex_string(tok);
            } else if (c == '#') {
                advance();
                tok.kind = Tok::Hash;
                tok.text = "#";
            } else {
                tok.kind = Tok::Punct;
                static const char* kTwo[] = {"==", "!=", "<=", ">=", "<<", ">>", "->"};
                for (const char* two : kTwo) {
                    if (text_.substr(pos_, 2) == two) {
                        tok.text = two;
                        advance();
                        advance();
                        break;
                    }
                }
                if (tok.text.empty()) {
                    static const std::string_view kOne = "(){}[],;:=+-*/%&|^<>!?";
                    if (kOne.find(c) == std::string_view::npos) {
                        throw Error(ErrorCode::ParseError, std::string("unexpected character '") + c + "'", here());
                    }
                    tok.text = std::string(1, advance());
                }
            }
            out.push_back(std::move(tok));
        }
    }

  private:
    SourceLoc here() const { return {file_, line_, col_}; }

    char advance() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (text_.substr(pos_, 2) == "//") {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    void lex_int(Token& tok) {
        SourceLoc start = here();
        std::string digits;
        int base = 10;
        if (text_.substr(pos_, 2) == "0x" || text_.substr(pos_, 2) == "0X") {
            advance();
            advance();
            base = 16;
        }
        while (pos_ < text_.size() && std::isxdigit(static_cast<unsigned char>(text_[pos_]))) {
            if (base == 10 && !std::isdigit(static_cast<unsigned char>(text_[pos_]))) break;
            digits += advance();
        }
        if (pos_ < text_.size() &&
            (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            throw Error(ErrorCode::ParseError, "malformed integer literal", start);
        }
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), tok.int_value, base);
        if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
            throw Error(ErrorCode::ParseError, "malformed integer literal", start);
        }
        tok.text = (base == 16 ? "0x" : "") + digits;
    }

    void lex_string(Token& tok) {
        SourceLoc start = here();
        advance();
        for (;;) {
            if (pos_ >= text_.size() || text_[pos_] == '\n') {
                throw Error(ErrorCode::ParseError, "unterminated string literal", start);
            }
            char c = advance();
            if (c == '"') break;
            if (c != '\\') {
                tok.bytes.push_back(static_cast<uint8_t>(c));
                continue;
            }
            if (pos_ >= text_.size()) throw Error(ErrorCode::ParseError, "bad escape", start);
            char e = advance();
            switch (e) {
            case 'n': tok.bytes.push_back('\n'); break;
            case 't': tok.bytes.push_back('\t'); break;
            case '0': tok.bytes.push_back(0); break;
            case '\\': tok.bytes.push_back('\\'); break;
            case '"': tok.bytes.push_back('"'); break;
            case 'x': {
                std::string hex;
                for (int i = 0; i < 2 && pos_ < text_.size() &&
                                std::isxdigit(static_cast<unsigned char>(text_[pos_]));
                     ++i) {
                    hex += advance();
                }
                if (hex.size() != 2) throw Error(ErrorCode::ParseError, "\\x needs two hex digits", start);
                tok.bytes.push_back(static_cast<uint8_t>(std::stoul(hex, nullptr, 16)));
                break;
            }
            default: throw Error(ErrorCode::ParseError, std::string("unknown escape \\") + e, start);
            }
        }
    }

    std::string_view text_;
    std::string file_;
    size_t pos_ = 0;
    uint32_t line_ = 1;
    uint32_t col_ = 1;
};

class Parser {
  public:
    Parser(std::vector<Token> tokens, std::string default_unit)
        : toks_(std::move(tokens)), default_unit_(std::move(default_unit)) {}

    SourceProgram run() {
        SourceProgram program;
        TranslationUnit unit;
        unit.name = default_unit_;
        unit.loc = peek().loc;
        bool explicit_unit = false;
        bool has_pragma = false;
        bool has_content = false;

        auto finish = [&]() {
            if (!has_pragma && (has_content || explicit_unit)) {
                throw Error(ErrorCode::MissingPragma,
                            "translation unit '" + unit.name + "' has no '#pragma partition' directive", unit.loc);
            }
            if (has_pragma) program.units.push_back(std::move(unit));
        };

        while (peek().kind != Tok::End) {
            if (peek().kind == Tok::Hash) {
                const Token hash = next();
                const Token word = expect_same_line(hash, Tok::Ident, "directive name");
                if (word.text == "unit") {
                    const Token name = expect_same_line(hash, Tok::Ident, "unit name");
                    finish();
                    unit = TranslationUnit{};
                    unit.name = name.text;
                    unit.loc = hash.loc;
                    explicit_unit = true;
                    has_pragma = false;
                    has_content = false;
                } else if (word.text == "pragma") {
                    const Token kind = expect_same_line(hash, Tok::Ident, "pragma kind");
                    if (kind.text == "partition") {
                        const Token label = expect_same_line(hash, Tok::Int, "partition label");
                        const Token rights = expect_same_line(hash, Tok::Ident, "default rights");
                        if (has_pragma) {
                            throw Error(ErrorCode::DuplicatePragma,
                                        "translation unit '" + unit.name + "' already has a partition pragma",
                                        hash.loc);
                        }
                        unit.pragma = {to_label(label), to_rights(rights), hash.loc};
                        has_pragma = true;
                    } else if (kind.text == "partition_name") {
                        const Token label = expect_same_line(hash, Tok::Int, "partition label");
                        const Token name = expect_same_line(hash, Tok::Ident, "partition name");
                        unit.names.push_back({to_label(label), name.text, hash.loc});
                        has_content = true;
                    } else {
                        throw Error(ErrorCode::ParseError, "unknown pragma '" + kind.text + "'", kind.loc);
                    }
                } else {
                    throw Error(ErrorCode::ParseError, "unknown directive '#" + word.text + "'", word.loc);
                }
                continue;
            }
            parse_item(unit);
            has_content = true;
        }
        finish();
        return program;
    }

  private:
    const Token& peek(size_t ahead = 0) const {
        size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    Token next() {
        Token t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool is_punct(std::string_view p, size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
    }
    bool is_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }

    [[noreturn]] void fail(const std::string& what) const {
        const Token& t = peek();
        if (t.kind == Tok::End || t.kind == Tok::Hash) end_of_scope(what);
        throw Error(ErrorCode::ParseError, "expected " + what + ", found '" + t.text + "'", t.loc);
    }

    // The input ended (or a new unit began) inside a brace-delimited construct.
    [[noreturn]] void end_of_scope(const std::string& what) const {
        if (!open_refinements_.empty()) {
            throw Error(ErrorCode::UnbalancedRefinement,
                        "privilege refinement opened here is never closed", open_refinements_.back());
        }
        // A refinement that closed early took a brace meant for an enclosing
        // construct; the function is what is left open.
        if (refinement_in_function_) {
            throw Error(ErrorCode::UnbalancedRefinement,
                        "function ends unbalanced after the privilege refinement here", *refinement_in_function_);
        }
        throw Error(ErrorCode::ParseError, "unexpected end of unit, expected " + what, peek().loc);
    }

    Token expect(Tok kind, const std::string& what) {
        if (peek().kind != kind) fail(what);
        return next();
    }
    Token expect_same_line(const Token& anchor, Tok kind, const std::string& what) {
        if (peek().kind != kind || peek().loc.line != anchor.loc.line) {
            throw Error(ErrorCode::ParseError, "expected " + what + " on the directive line", anchor.loc);
        }
        return next();
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) fail("'" + std::string(p) + "'");
        next();
    }
    void expect_word(std::string_view w) {
        if (!is_word(w)) fail("'" + std::string(w) + "'");
        next();
    }

    static PartitionLabel to_label(const Token& t) {
        if (t.int_value > 0xffffffffu) throw Error(ErrorCode::ParseError, "partition label out of range", t.loc);
        return static_cast<PartitionLabel>(t.int_value);
    }
    static AccessRights to_rights(const Token& t) {
        auto rights = AccessRights::parse(t.text);
        if (!rights) throw Error(ErrorCode::ParseError, "unknown rights '" + t.text + "'", t.loc);
        return *rights;
    }

    bool at_attribute() const { return is_punct("[") && is_punct("[", 1); }

    RightsAttr parse_attribute(std::string& kind) {
        SourceLoc loc = peek().loc;
        expect_punct("[");
        expect_punct("[");
        Token word = expect(Tok::Ident, "'partition' or 'privilege'");
        if (word.text != "partition" && word.text != "privilege") {
            throw Error(ErrorCode::ParseError, "unknown attribute '" + word.text + "'", word.loc);
        }
        kind = word.text;
        expect_punct("(");
        Token label = expect(Tok::Int, "partition label");
        expect_punct(",");
        Token rights = expect(Tok::Ident, "rights");
        expect_punct(")");
        expect_punct("]");
        expect_punct("]");
        return {to_label(label), to_rights(rights), loc};
    }

    TypeSpec parse_type() {
        Token t = expect(Tok::Ident, "type");
        if (t.text == "int") return {TypeKind::Scalar, 8};
        if (t.text == "ptr") return {TypeKind::Pointer, 8};
        if (t.text == "bytes") {
            expect_punct("[");
            Token n = expect(Tok::Int, "array length");
            expect_punct("]");
            if (n.int_value == 0 || n.int_value > (1u << 20)) {
                throw Error(ErrorCode::ParseError, "array length must be in 1..1048576", n.loc);
            }
            return {TypeKind::Aggregate, static_cast<uint32_t>(n.int_value)};
        }
        throw Error(ErrorCode::ParseError, "unknown type '" + t.text + "'", t.loc);
    }

    void parse_item(TranslationUnit& unit) {
        std::optional<RightsAttr> partition_attr;
        std::vector<RightsAttr> privileges;
        while (at_attribute()) {
            std::string kind;
            RightsAttr attr = parse_attribute(kind);
            if (kind == "partition") {
                if (partition_attr) throw Error(ErrorCode::ParseError, "duplicate partition attribute", attr.loc);
                partition_attr = attr;
            } else {
                privileges.push_back(attr);
            }
        }
        if (is_word("fn") || is_word("noreturn")) {
            if (partition_attr) {
                throw Error(ErrorCode::ParseError, "partition attributes apply to variables, not functions",
                            partition_attr->loc);
            }
            unit.functions.push_back(parse_function(std::move(privileges)));
            return;
        }
        if (is_word("global") || is_word("const")) {
            if (!privileges.empty()) {
                throw Error(ErrorCode::ParseError, "privilege attributes apply to code, not data", privileges[0].loc);
            }
            unit.globals.push_back(parse_global(partition_attr));
            return;
        }
        if (!privileges.empty() && is_punct(";")) {
            throw Error(ErrorCode::UnbalancedRefinement, "privilege refinement has no extent", privileges.back().loc);
        }
        fail("'fn' or 'global'");
    }

    VariableDecl parse_global(std::optional<RightsAttr> attr) {
        VariableDecl decl;
        decl.scope = VarScope::Global;
        decl.partition_attr = attr;
        decl.loc = attr ? attr->loc : peek().loc;
        if (is_word("const")) {
            next();
            decl.immutable = true;
        }
        expect_word("global");
        decl.name = expect(Tok::Ident, "variable name").text;
        check_not_keyword(decl.name);
        expect_punct(":");
        decl.type = parse_type();
        if (is_punct("=")) {
            next();
            if (peek().kind == Tok::String) {
                Token s = next();
                if (decl.type.kind != TypeKind::Aggregate || s.bytes.size() > decl.type.size) {
                    throw Error(ErrorCode::ParseError, "string initializer does not fit the variable", s.loc);
                }
                decl.init_bytes = s.bytes;
            } else {
                bool negative = false;
                if (is_punct("-")) {
                    next();
                    negative = true;
                }
                Token n = expect(Tok::Int, "initializer");
                if (decl.type.kind == TypeKind::Aggregate) {
                    throw Error(ErrorCode::ParseError, "byte arrays take a string initializer", n.loc);
                }
                int64_t v = static_cast<int64_t>(n.int_value);
                decl.init_value = negative ? -v : v;
            }
        }
        expect_punct(";");
        return decl;
    }

    FunctionDef parse_function(std::vector<RightsAttr> privileges) {
        FunctionDef fn;
        fn.loc = privileges.empty() ? peek().loc : privileges.front().loc;
        fn.refinements = std::move(privileges);
        if (is_word("noreturn")) {
            next();
            fn.noreturn = true;
        }
        expect_word("fn");
        fn.name = expect(Tok::Ident, "function name").text;
        check_not_keyword(fn.name);
        expect_punct("(");
        if (!is_punct(")")) {
            for (;;) {
                std::string p = expect(Tok::Ident, "parameter name").text;
                check_not_keyword(p);
                fn.params.push_back(p);
                if (!is_punct(",")) break;
                next();
            }
        }
        expect_punct(")");
        const size_t depth = open_refinements_.size();
        for (const auto& r : fn.refinements) open_refinements_.push_back(r.loc);
        refinement_in_function_.reset();
        fn.body = parse_block();
        refinement_in_function_.reset();
        open_refinements_.resize(depth);
        return fn;
    }

    std::vector<Stmt> parse_block() {
        if (peek().kind == Tok::End || peek().kind == Tok::Hash) end_of_scope("'{'");
        expect_punct("{");
        std::vector<Stmt> body;
        for (;;) {
            if (peek().kind == Tok::End || peek().kind == Tok::Hash) end_of_scope("'}'");
            if (is_punct("}")) break;
            body.push_back(parse_stmt());
        }
        next();
        return body;
    }

    Stmt parse_stmt() {
        Stmt st;
        st.loc = peek().loc;
        if (at_attribute()) {
            std::string kind;
            RightsAttr attr = parse_attribute(kind);
            if (kind == "partition") {
                if (!is_word("let")) fail("'let' after a partition attribute");
                Stmt let = parse_let();
                let.decl.partition_attr = attr;
                let.loc = attr.loc;
                let.decl.loc = attr.loc;
                return let;
            }
            st.kind = Stmt::Kind::Refine;
            st.refinement = attr;
            open_refinements_.push_back(attr.loc);
            refinement_in_function_ = attr.loc;
            if (is_punct(";")) {
                throw Error(ErrorCode::UnbalancedRefinement, "privilege refinement has no extent", attr.loc);
            }
            if (is_punct("{")) {
                st.braced = true;
                st.body = parse_block();
            } else {
                if (peek().kind == Tok::End || peek().kind == Tok::Hash) end_of_scope("statement");
                st.braced = false;
                st.body.push_back(parse_stmt());
            }
            open_refinements_.pop_back();
            return st;
        }
        if (is_punct("{")) {
            st.kind = Stmt::Kind::Block;
            st.body = parse_block();
            return st;
        }
        if (is_word("let")) return parse_let();
        if (is_word("const")) {
            throw Error(ErrorCode::ParseError, "'const' is only permitted on globals", peek().loc);
        }
        if (is_word("if")) {
            next();
            st.kind = Stmt::Kind::If;
            expect_punct("(");
            st.exprs.push_back(parse_expr());
            expect_punct(")");
            st.body = parse_block();
            if (is_word("else")) {
                next();
                st.has_else = true;
                if (is_word("if")) {
                    st.else_body.push_back(parse_stmt());
                } else {
                    st.else_body = parse_block();
                }
            }
            return st;
        }
        if (is_word("while")) {
            next();
            st.kind = Stmt::Kind::While;
            expect_punct("(");
            st.exprs.push_back(parse_expr());
            expect_punct(")");
            st.body = parse_block();
            return st;
        }
        if (is_word("return")) {
            next();
            st.kind = Stmt::Kind::Return;
            if (!is_punct(";")) st.exprs.push_back(parse_expr());
            expect_punct(";");
            return st;
        }
        if (is_word("free")) {
            next();
            st.kind = Stmt::Kind::Free;
            expect_punct("(");
            st.exprs.push_back(parse_expr());
            expect_punct(")");
            expect_punct(";");
            return st;
        }
        if (is_word("halt")) {
            next();
            st.kind = Stmt::Kind::Halt;
            expect_punct(";");
            return st;
        }
        if (peek().kind == Tok::End || peek().kind == Tok::Hash) end_of_scope("statement");
        Expr e = parse_expr();
        if (is_punct("=")) {
            if (e.kind != Expr::Kind::Name && e.kind != Expr::Kind::Deref && e.kind != Expr::Kind::Index) {
                throw Error(ErrorCode::ParseError, "left side of '=' is not assignable", e.loc);
            }
            next();
            st.kind = Stmt::Kind::Assign;
            st.exprs.push_back(std::move(e));
            st.exprs.push_back(parse_expr());
        } else {
            st.kind = Stmt::Kind::Expr;
            st.exprs.push_back(std::move(e));
        }
        expect_punct(";");
        return st;
    }

    Stmt parse_let() {
        Stmt st;
        st.kind = Stmt::Kind::Let;
        st.loc = peek().loc;
        expect_word("let");
        st.decl.scope = VarScope::Local;
        st.decl.loc = st.loc;
        st.decl.name = expect(Tok::Ident, "variable name").text;
        check_not_keyword(st.decl.name);
        expect_punct(":");
        st.decl.type = parse_type();
        if (is_punct("=")) {
            next();
            if (st.decl.type.kind == TypeKind::Aggregate) {
                throw Error(ErrorCode::ParseError, "byte arrays cannot be initialized", st.loc);
            }
            st.exprs.push_back(parse_expr());
        }
        expect_punct(";");
        return st;
    }

    static void check_not_keyword(const std::string& name) {
        static const std::set<std::string> kKeywords = {
            "global", "const", "let", "fn", "noreturn", "if", "else", "while", "return",
            "free", "halt", "alloc", "int", "ptr", "bytes"};
        if (kKeywords.count(name)) throw Error(ErrorCode::ParseError, "'" + name + "' is a keyword");
    }

    // Expressions, lowest precedence first.
    Expr parse_expr() { return parse_conditional(); }

    Expr parse_conditional() {
        Expr cond = parse_binary(0);
        if (!is_punct("?")) return cond;
        Expr e;
        e.kind = Expr::Kind::Conditional;
        e.loc = cond.loc;
        next();
        Expr then_e = parse_expr();
        expect_punct(":");
        Expr else_e = parse_conditional();
        e.operands.push_back(std::move(cond));
        e.operands.push_back(std::move(then_e));
        e.operands.push_back(std::move(else_e));
        return e;
    }

    struct OpInfo {
        std::string_view text;
        BinaryOp op;
        int level;
    };

    static const std::vector<OpInfo>& binary_ops() {
        static const std::vector<OpInfo> kOps = {
            {"|", BinaryOp::Or, 0},  {"^", BinaryOp::Xor, 1}, {"&", BinaryOp::And, 2},
            {"==", BinaryOp::Eq, 3}, {"!=", BinaryOp::Ne, 3}, {"<", BinaryOp::Lt, 4},
            {"<=", BinaryOp::Le, 4}, {">", BinaryOp::Gt, 4},  {">=", BinaryOp::Ge, 4},
            {"<<", BinaryOp::Shl, 5}, {">>", BinaryOp::Shr, 5}, {"+", BinaryOp::Add, 6},
            {"-", BinaryOp::Sub, 6}, {"*", BinaryOp::Mul, 7}, {"/", BinaryOp::Div, 7},
            {"%", BinaryOp::Rem, 7},
        };
        return kOps;
    }

    const OpInfo* binary_at(int level) const {
        if (peek().kind != Tok::Punct) return nullptr;
        for (const auto& info : binary_ops()) {
            if (info.level == level && info.text == peek().text) return &info;
        }
        return nullptr;
    }

    Expr parse_binary(int level) {
        if (level > 7) return parse_unary();
        Expr lhs = parse_binary(level + 1);
        while (const OpInfo* info = binary_at(level)) {
            next();
            Expr e;
            e.kind = Expr::Kind::Binary;
            e.binary = info->op;
            e.loc = lhs.loc;
            e.operands.push_back(std::move(lhs));
            e.operands.push_back(parse_binary(level + 1));
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr parse_unary() {
        Expr e;
        e.loc = peek().loc;
        if (is_punct("-") || is_punct("!")) {
            e.kind = Expr::Kind::Unary;
            e.unary = peek().text == "-" ? UnaryOp::Neg : UnaryOp::Not;
            next();
            e.operands.push_back(parse_unary());
            return e;
        }
        if (is_punct("*")) {
            next();
            e.kind = Expr::Kind::Deref;
            e.operands.push_back(parse_unary());
            return e;
        }
        if (is_punct("&")) {
            next();
            e.kind = Expr::Kind::AddrOf;
            e.name = expect(Tok::Ident, "variable name after '&'").text;
            return e;
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        while (is_punct("[")) {
            next();
            Expr idx;
            idx.kind = Expr::Kind::Index;
            idx.loc = e.loc;
            idx.operands.push_back(std::move(e));
            idx.operands.push_back(parse_expr());
            expect_punct("]");
            e = std::move(idx);
        }
        return e;
    }

    Expr parse_primary() {
        Expr e;
        e.loc = peek().loc;
        if (peek().kind == Tok::Int) {
            e.kind = Expr::Kind::IntLit;
            e.value = static_cast<int64_t>(next().int_value);
            return e;
        }
        if (is_punct("(")) {
            next();
            Expr inner = parse_expr();
            expect_punct(")");
            return inner;
        }
        if (is_word("alloc")) {
            next();
            e.kind = Expr::Kind::Alloc;
            expect_punct("(");
            e.operands.push_back(parse_expr());
            expect_punct(")");
            return e;
        }
        if (peek().kind == Tok::Ident) {
            e.name = next().text;
            check_not_keyword(e.name);
            if (is_punct("(")) {
                next();
                e.kind = Expr::Kind::Call;
                if (!is_punct(")")) {
                    for (;;) {
                        e.operands.push_back(parse_expr());
                        if (!is_punct(",")) break;
                        next();
                    }
                }
                expect_punct(")");
                return e;
            }
            e.kind = Expr::Kind::Name;
            return e;
        }
        fail("expression");
    }

    std::vector<Token> toks_;
    std::string default_unit_;
    size_t pos_ = 0;
    std::vector<SourceLoc> open_refinements_;
    std::optional<SourceLoc> refinement_in_function_;
};

// ---- printer ----

const char* binary_text(BinaryOp op) {
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Rem: return "%";
    case BinaryOp::And: return "&";
    case BinaryOp::Or: return "|";
    case BinaryOp::Xor: return "^";
    case BinaryOp::Shl: return "<<";
    case BinaryOp::Shr: return ">>";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    }
    return "?";
}

std::string print_int(int64_t v) {
    if (v >= 0) return std::to_string(v);
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<uint64_t>(v), 16);
    return "0x" + std::string(buf, ptr);
}

std::string print_expr(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::IntLit: return print_int(e.value);
    case Expr::Kind::Name: return e.name;
    case Expr::Kind::AddrOf: return "&" + e.name;
    case Expr::Kind::Deref: return "*(" + print_expr(e.operands[0]) + ")";
    case Expr::Kind::Index: return "(" + print_expr(e.operands[0]) + ")[" + print_expr(e.operands[1]) + "]";
    case Expr::Kind::Alloc: return "alloc(" + print_expr(e.operands[0]) + ")";
    case Expr::Kind::Unary:
        return std::string(e.unary == UnaryOp::Neg ? "-" : "!") + "(" + print_expr(e.operands[0]) + ")";
    case Expr::Kind::Binary:
        return "(" + print_expr(e.operands[0]) + " " + binary_text(e.binary) + " " + print_expr(e.operands[1]) + ")";
    case Expr::Kind::Conditional:
        return "(" + print_expr(e.operands[0]) + " ? " + print_expr(e.operands[1]) + " : " +
               print_expr(e.operands[2]) + ")";
    case Expr::Kind::Call: {
        std::string out = e.name + "(";
        for (size_t i = 0; i < e.operands.size(); ++i) {
            if (i) out += ", ";
            out += print_expr(e.operands[i]);
        }
        return out + ")";
    }
    }
    return "";
}

std::string print_type(const TypeSpec& t) {
    switch (t.kind) {
    case TypeKind::Scalar: return "int";
    case TypeKind::Pointer: return "ptr";
    case TypeKind::Aggregate: return "bytes[" + std::to_string(t.size) + "]";
    }
    return "int";
}

std::string print_attr(const char* kind, const RightsAttr& a) {
    return std::string("[[") + kind + "(" + std::to_string(a.label) + ", " + std::string(a.rights.to_string()) +
           ")]]";
}

std::string print_bytes(const std::vector<uint8_t>& bytes) {
    static const char* kHex = "0123456789abcdef";
    std::string out = "\"";
    for (uint8_t b : bytes) {
        if (b >= 0x20 && b < 0x7f && b != '"' && b != '\\') {
            out += static_cast<char>(b);
        } else {
            out += "\\x";
            out += kHex[b >> 4];
            out += kHex[b & 15];
        }
    }
    return out + "\"";
}

void print_block(std::string& out, const std::vector<Stmt>& body, int depth);

void print_stmt(std::string& out, const Stmt& st, int depth) {
    const std::string pad(static_cast<size_t>(depth) * 4, ' ');
    switch (st.kind) {
    case Stmt::Kind::Let:
        out += pad;
        if (st.decl.partition_attr) out += print_attr("partition", *st.decl.partition_attr) + " ";
        out += "let " + st.decl.name + ": " + print_type(st.decl.type);
        if (!st.exprs.empty()) out += " = " + print_expr(st.exprs[0]);
        out += ";\n";
        return;
    case Stmt::Kind::Assign:
        out += pad + print_expr(st.exprs[0]) + " = " + print_expr(st.exprs[1]) + ";\n";
        return;
    case Stmt::Kind::Expr:
        out += pad + print_expr(st.exprs[0]) + ";\n";
        return;
    case Stmt::Kind::If:
        out += pad + "if (" + print_expr(st.exprs[0]) + ") ";
        print_block(out, st.body, depth);
        if (st.has_else) {
            out.pop_back();
            out += " else ";
            if (st.else_body.size() == 1 && st.else_body[0].kind == Stmt::Kind::If) {
                std::string nested;
                print_stmt(nested, st.else_body[0], depth);
                out += nested.substr(pad.size());
            } else {
                print_block(out, st.else_body, depth);
            }
        }
        return;
    case Stmt::Kind::While:
        out += pad + "while (" + print_expr(st.exprs[0]) + ") ";
        print_block(out, st.body, depth);
        return;
    case Stmt::Kind::Return:
        out += pad + "return";
        if (!st.exprs.empty()) out += " " + print_expr(st.exprs[0]);
        out += ";\n";
        return;
    case Stmt::Kind::Free:
        out += pad + "free(" + print_expr(st.exprs[0]) + ");\n";
        return;
    case Stmt::Kind::Halt:
        out += pad + "halt;\n";
        return;
    case Stmt::Kind::Refine:
        out += pad + print_attr("privilege", st.refinement) + " ";
        if (st.braced) {
            print_block(out, st.body, depth);
        } else {
            std::string inner;
            print_stmt(inner, st.body[0], depth);
            out += inner.substr(pad.size());
        }
        return;
    case Stmt::Kind::Block:
        out += pad;
        print_block(out, st.body, depth);
        return;
    }
}

void print_block(std::string& out, const std::vector<Stmt>& body, int depth) {
    out += "{\n";
    for (const auto& st : body) print_stmt(out, st, depth + 1);
    out += std::string(static_cast<size_t>(depth) * 4, ' ') + "}\n";
}

} // namespace

ast::SourceProgram parse_program(std::string_view text, std::string_view file) {
    std::string unit_name = "unit";
    if (!file.empty()) unit_name = std::filesystem::path(file).stem().string();
    Lexer lexer(text, std::string(file));
    Parser parser(lexer.run(), unit_name);
    return parser.run();
}

std::string print_program(const ast::SourceProgram& program) {
    std::string out;
    for (const auto& unit : program.units) {
        out += "#unit " + unit.name + "\n";
        out += "#pragma partition " + std::to_string(unit.pragma.label) + " " +
               std::string(unit.pragma.rights.to_string()) + "\n";
        for (const auto& n : unit.names) {
            out += "#pragma partition_name " + std::to_string(n.label) + " " + n.name + "\n";
        }
        for (const auto& g : unit.globals) {
            if (g.partition_attr) out += print_attr("partition", *g.partition_attr) + " ";
            if (g.immutable) out += "const ";
            out += "global " + g.name + ": " + print_type(g.type);
            if (g.init_bytes) out += " = " + print_bytes(*g.init_bytes);
            if (g.init_value) out += " = " + print_int(*g.init_value);
            out += ";\n";
        }
        for (const auto& fn : unit.functions) {
            for (const auto& r : fn.refinements) out += print_attr("privilege", r) + "\n";
            if (fn.noreturn) out += "noreturn ";
            out += "fn " + fn.name + "(";
            for (size_t i = 0; i < fn.params.size(); ++i) {
                if (i) out += ", ";
                out += fn.params[i];
            }
            out += ") ";
            print_block(out, fn.body, 0);
        }
    }
    return out;
}

} // namespace partc
