#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "metagen/assembly.hpp"
#include "metagen/cp.hpp"
#include "metagen/errors.hpp"
#include "metagen/lifting.hpp"

namespace metagen::frontend {

// ---------------------------------------------------------------------------
// Tokens

enum class Tok {
    End, Newline, Indent, Dedent,
    Name, Number, String, True, False,
    Def, Return, For, In, If, Elif, Else, From, Import,
    Plus, Minus, Star, Slash, DoubleStar,
    Eq, EqEq, NotEq, Lt, Le, Gt, Ge,
    LParen, RParen, LBracket, RBracket,
    Comma, Colon, Dot, Arrow,
};

struct Token {
    Tok kind;
    std::string text;
    double number = 0;
    SourceSpan span;
};

namespace detail {

class Lexer {
  public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run() {
        skip_header_block();
        indents_.push_back(0);
        while (pos_ < src_.size()) {
            if (at_line_start_ && bracket_depth_ == 0) {
                lex_indentation();
                if (pos_ >= src_.size()) break;
            }
            if (pos_ >= src_.size()) break;
            char c = src_[pos_];
            if (c == '\n') {
                ++pos_;
                ++line_;
                col_ = 1;
                if (bracket_depth_ == 0 && !tokens_.empty() &&
                    tokens_.back().kind != Tok::Newline && tokens_.back().kind != Tok::Indent &&
                    tokens_.back().kind != Tok::Dedent)
                    push(Tok::Newline, "\n");
                at_line_start_ = true;
                continue;
            }
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
                continue;
            }
            if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
                pos_ += 2;
                ++line_;
                col_ = 1;
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && pos_ + 1 < src_.size() &&
                 std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                lex_number();
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                lex_name();
                continue;
            }
            if (c == '"' || c == '\'') {
                lex_string();
                continue;
            }
            lex_operator();
        }
        if (!tokens_.empty() && tokens_.back().kind != Tok::Newline) push(Tok::Newline, "\n");
        while (indents_.size() > 1) {
            indents_.pop_back();
            push(Tok::Dedent, "");
        }
        push(Tok::End, "");
        return std::move(tokens_);
    }

  private:
    void skip_header_block() {
        if (src_.rfind("'''", 0) != 0) return;
        size_t end = src_.find("'''", 3);
        if (end == std::string::npos)
            fail("MalformedHeader", "unterminated header block delimiter", {1, 1});
        size_t skip = end + 3;
        while (skip < src_.size() && src_[skip] != '\n') ++skip;
        if (skip < src_.size()) ++skip;
        for (size_t i = 0; i < skip; ++i)
            if (src_[i] == '\n') ++line_;
        pos_ = skip;
    }

    SourceSpan here() const { return {line_, col_}; }

    void advance() {
        ++pos_;
        ++col_;
    }

    void push(Tok kind, std::string text, SourceSpan span = {}) {
        if (!span.valid()) span = here();
        tokens_.push_back({kind, std::move(text), 0, span});
    }

    void lex_indentation() {
        at_line_start_ = false;
        int width = 0;
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) {
            if (src_[pos_] == '\t')
                fail("SyntaxError", "tabs are not allowed in indentation", here());
            ++width;
            advance();
        }
        if (pos_ >= src_.size() || src_[pos_] == '\n' || src_[pos_] == '#') return;  // blank line
        if (width > indents_.back()) {
            indents_.push_back(width);
            push(Tok::Indent, "");
        } else {
            while (width < indents_.back()) {
                indents_.pop_back();
                push(Tok::Dedent, "");
            }
            if (width != indents_.back())
                fail("SyntaxError", "inconsistent indentation", here());
        }
    }

    void lex_number() {
        SourceSpan span = here();
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                src_[pos_] == 'e' || src_[pos_] == 'E' ||
                ((src_[pos_] == '+' || src_[pos_] == '-') && pos_ > start &&
                 (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
            advance();
        std::string text = src_.substr(start, pos_ - start);
        tokens_.push_back({Tok::Number, text, std::stod(text), span});
    }

    void lex_name() {
        SourceSpan span = here();
        size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '_'))
            advance();
        std::string text = src_.substr(start, pos_ - start);
        static const std::map<std::string, Tok> keywords = {
            {"def", Tok::Def},   {"return", Tok::Return}, {"for", Tok::For},
            {"in", Tok::In},     {"if", Tok::If},         {"elif", Tok::Elif},
            {"else", Tok::Else}, {"from", Tok::From},     {"import", Tok::Import},
            {"True", Tok::True}, {"False", Tok::False},
        };
        auto it = keywords.find(text);
        if (it != keywords.end()) {
            if (text == "while")
                fail("SyntaxError", "while loops are not supported", span);
            push(it->second, text, span);
        } else if (text == "while" || text == "class" || text == "lambda" || text == "import") {
            fail("SyntaxError", "'" + text + "' is not supported", span);
        } else {
            push(Tok::Name, text, span);
        }
    }

    void lex_string() {
        SourceSpan span = here();
        char quote = src_[pos_];
        advance();
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != quote && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
                advance();
                char e = src_[pos_];
                out += (e == 'n' ? '\n' : e == 't' ? '\t' : e);
                advance();
            } else {
                out += src_[pos_];
                advance();
            }
        }
        if (pos_ >= src_.size() || src_[pos_] != quote)
            fail("SyntaxError", "unterminated string literal", span);
        advance();
        push(Tok::String, out, span);
    }

    void lex_operator() {
        SourceSpan span = here();
        char c = src_[pos_];
        auto two = [&](char a, char b) {
            return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
        };
        if (two('*', '*')) { pos_ += 2; col_ += 2; push(Tok::DoubleStar, "**", span); return; }
        if (two('=', '=')) { pos_ += 2; col_ += 2; push(Tok::EqEq, "==", span); return; }
        if (two('!', '=')) { pos_ += 2; col_ += 2; push(Tok::NotEq, "!=", span); return; }
        if (two('<', '=')) { pos_ += 2; col_ += 2; push(Tok::Le, "<=", span); return; }
        if (two('>', '=')) { pos_ += 2; col_ += 2; push(Tok::Ge, ">=", span); return; }
        if (two('-', '>')) { pos_ += 2; col_ += 2; push(Tok::Arrow, "->", span); return; }
        switch (c) {
            case '+': advance(); push(Tok::Plus, "+", span); return;
            case '-': advance(); push(Tok::Minus, "-", span); return;
            case '*': advance(); push(Tok::Star, "*", span); return;
            case '/': advance(); push(Tok::Slash, "/", span); return;
            case '=': advance(); push(Tok::Eq, "=", span); return;
            case '<': advance(); push(Tok::Lt, "<", span); return;
            case '>': advance(); push(Tok::Gt, ">", span); return;
            case '(': advance(); ++bracket_depth_; push(Tok::LParen, "(", span); return;
            case ')': advance(); --bracket_depth_; push(Tok::RParen, ")", span); return;
            case '[': advance(); ++bracket_depth_; push(Tok::LBracket, "[", span); return;
            case ']': advance(); --bracket_depth_; push(Tok::RBracket, "]", span); return;
            case ',': advance(); push(Tok::Comma, ",", span); return;
            case ':': advance(); push(Tok::Colon, ":", span); return;
            case '.': advance(); push(Tok::Dot, ".", span); return;
            default:
                fail("SyntaxError", std::string("unexpected character '") + c + "'", span);
        }
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    bool at_line_start_ = true;
    int bracket_depth_ = 0;
    std::vector<int> indents_;
    std::vector<Token> tokens_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// AST

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
    enum Kind { Num, Str, Bool, NameRef, Attribute, Call, ListLit, Index, Binary, Unary, Compare } kind;
    SourceSpan span;

    double number = 0;
    bool is_int_literal = false;
    std::string text;  // Str value, NameRef/Attribute name, Binary/Compare op
    bool boolean = false;

    ExprPtr a, b;                 // operands / object / index
    std::vector<ExprPtr> items;   // call args, list items
    std::vector<std::pair<std::string, ExprPtr>> kwargs;
};

struct Stmt;
using StmtPtr = std::shared_ptr<Stmt>;

struct Stmt {
    enum Kind { ImportMetagen, FunctionDef, Assign, ExprStmt, Return, For, If } kind;
    SourceSpan span;

    std::string name;                         // function or target or loop var
    std::vector<std::pair<std::string, ExprPtr>> params;  // def params (default may be null)
    std::vector<StmtPtr> body;
    ExprPtr value;                            // assign/return/expr/loop iterable
    std::vector<std::pair<ExprPtr, std::vector<StmtPtr>>> arms;  // if/elif
    std::vector<StmtPtr> else_body;
};

struct Ast {
    std::vector<StmtPtr> statements;
    std::string source;
};

/// Design parameter of make_structure.
struct ParamSpec {
    std::string name;
    double default_value = 0;
    int declared_order = 0;
};

namespace detail {

class Parser {
  public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    std::vector<StmtPtr> parse_module() {
        std::vector<StmtPtr> stmts;
        skip_newlines();
        while (!at(Tok::End)) {
            stmts.push_back(statement());
            skip_newlines();
        }
        return stmts;
    }

  private:
    const Token& peek(int off = 0) const {
        size_t i = std::min(pos_ + off, toks_.size() - 1);
        return toks_[i];
    }
    bool at(Tok k) const { return peek().kind == k; }
    Token eat() { return toks_[pos_++]; }
    Token expect(Tok k, const std::string& what) {
        if (!at(k)) fail("SyntaxError", "expected " + what, peek().span);
        return eat();
    }
    void skip_newlines() {
        while (at(Tok::Newline)) eat();
    }

    std::vector<StmtPtr> block() {
        expect(Tok::Colon, "':'");
        expect(Tok::Newline, "newline");
        expect(Tok::Indent, "an indented block");
        std::vector<StmtPtr> body;
        skip_newlines();
        while (!at(Tok::Dedent) && !at(Tok::End)) {
            body.push_back(statement());
            skip_newlines();
        }
        expect(Tok::Dedent, "dedent");
        return body;
    }

    StmtPtr statement() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::From: return import_stmt();
            case Tok::Import: fail("SyntaxError", "only 'from metagen import *' is supported", t.span);
            case Tok::Def: return function_def();
            case Tok::Return: return return_stmt();
            case Tok::For: return for_stmt();
            case Tok::If: return if_stmt();
            default: return simple_stmt();
        }
    }

    StmtPtr import_stmt() {
        auto s = std::make_shared<Stmt>();
        s->kind = Stmt::ImportMetagen;
        s->span = eat().span;  // from
        Token mod = expect(Tok::Name, "a module name");
        if (mod.text != "metagen")
            fail("SyntaxError", "only 'from metagen import *' is supported", mod.span);
        expect(Tok::Import, "'import'");
        expect(Tok::Star, "'*'");
        expect(Tok::Newline, "newline");
        return s;
    }

    StmtPtr function_def() {
        auto s = std::make_shared<Stmt>();
        s->kind = Stmt::FunctionDef;
        s->span = eat().span;  // def
        s->name = expect(Tok::Name, "a function name").text;
        expect(Tok::LParen, "'('");
        while (!at(Tok::RParen)) {
            Token p = expect(Tok::Name, "a parameter name");
            ExprPtr def;
            if (at(Tok::Eq)) {
                eat();
                def = expression();
            }
            for (auto& [existing, unused] : s->params)
                if (existing == p.text)
                    fail("SyntaxError", "duplicate parameter '" + p.text + "'", p.span);
            s->params.emplace_back(p.text, def);
            if (!at(Tok::RParen)) expect(Tok::Comma, "','");
        }
        eat();  // )
        if (at(Tok::Arrow)) {
            eat();
            expect(Tok::Name, "a return annotation");
        }
        s->body = block();
        return s;
    }

    StmtPtr return_stmt() {
        auto s = std::make_shared<Stmt>();
        s->kind = Stmt::Return;
        s->span = eat().span;
        if (!at(Tok::Newline)) s->value = expression();
        expect(Tok::Newline, "newline");
        return s;
    }

    StmtPtr for_stmt() {
        auto s = std::make_shared<Stmt>();
        s->kind = Stmt::For;
        s->span = eat().span;
        s->name = expect(Tok::Name, "a loop variable").text;
        expect(Tok::In, "'in'");
        s->value = expression();
        s->body = block();
        return s;
    }

    StmtPtr if_stmt() {
        auto s = std::make_shared<Stmt>();
        s->kind = Stmt::If;
        s->span = eat().span;
        ExprPtr cond = expression();
        s->arms.emplace_back(cond, block());
        skip_newlines();
        while (at(Tok::Elif)) {
            eat();
            ExprPtr c = expression();
            s->arms.emplace_back(c, block());
            skip_newlines();
        }
        if (at(Tok::Else)) {
            eat();
            s->else_body = block();
        }
        return s;
    }

    StmtPtr simple_stmt() {
        SourceSpan span = peek().span;
        ExprPtr e = expression();
        auto s = std::make_shared<Stmt>();
        s->span = span;
        if (at(Tok::Eq)) {
            if (e->kind != Expr::NameRef)
                fail("SyntaxError", "only simple names may be assigned", span);
            eat();
            s->kind = Stmt::Assign;
            s->name = e->text;
            s->value = expression();
        } else {
            s->kind = Stmt::ExprStmt;
            s->value = e;
        }
        expect(Tok::Newline, "newline");
        return s;
    }

    ExprPtr expression() { return comparison(); }

    ExprPtr comparison() {
        ExprPtr left = additive();
        if (at(Tok::EqEq) || at(Tok::NotEq) || at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) ||
            at(Tok::Ge)) {
            Token op = eat();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Compare;
            e->span = op.span;
            e->text = op.text;
            e->a = left;
            e->b = additive();
            return e;
        }
        return left;
    }

    ExprPtr additive() {
        ExprPtr left = multiplicative();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            Token op = eat();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Binary;
            e->span = op.span;
            e->text = op.text;
            e->a = left;
            e->b = multiplicative();
            left = e;
        }
        return left;
    }

    ExprPtr multiplicative() {
        ExprPtr left = unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            Token op = eat();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Binary;
            e->span = op.span;
            e->text = op.text;
            e->a = left;
            e->b = unary();
            left = e;
        }
        return left;
    }

    ExprPtr unary() {
        if (at(Tok::Minus) || at(Tok::Plus)) {
            Token op = eat();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Unary;
            e->span = op.span;
            e->text = op.text;
            e->a = unary();
            return e;
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr base = postfix();
        if (at(Tok::DoubleStar)) {
            Token op = eat();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Binary;
            e->span = op.span;
            e->text = "**";
            e->a = base;
            e->b = unary();  // right associative
            return e;
        }
        return base;
    }

    ExprPtr postfix() {
        ExprPtr e = atom();
        for (;;) {
            if (at(Tok::Dot)) {
                Token dot = eat();
                Token name = expect(Tok::Name, "an attribute name");
                auto a = std::make_shared<Expr>();
                a->kind = Expr::Attribute;
                a->span = dot.span;
                a->text = name.text;
                a->a = e;
                e = a;
            } else if (at(Tok::LParen)) {
                Token paren = eat();
                auto c = std::make_shared<Expr>();
                c->kind = Expr::Call;
                c->span = paren.span;
                c->a = e;
                while (!at(Tok::RParen)) {
                    if (at(Tok::Name) && peek(1).kind == Tok::Eq) {
                        Token kw = eat();
                        eat();  // =
                        c->kwargs.emplace_back(kw.text, expression());
                    } else {
                        if (!c->kwargs.empty())
                            fail("SyntaxError", "positional argument after keyword argument",
                                 peek().span);
                        c->items.push_back(expression());
                    }
                    if (!at(Tok::RParen)) expect(Tok::Comma, "','");
                }
                eat();
                e = c;
            } else if (at(Tok::LBracket)) {
                Token br = eat();
                auto ix = std::make_shared<Expr>();
                ix->kind = Expr::Index;
                ix->span = br.span;
                ix->a = e;
                ix->b = expression();
                expect(Tok::RBracket, "']'");
                e = ix;
            } else {
                return e;
            }
        }
    }

    ExprPtr atom() {
        const Token& t = peek();
        auto e = std::make_shared<Expr>();
        e->span = t.span;
        switch (t.kind) {
            case Tok::Number: {
                eat();
                e->kind = Expr::Num;
                e->number = t.number;
                e->is_int_literal = t.text.find_first_of(".eE") == std::string::npos;
                return e;
            }
            case Tok::String: {
                eat();
                e->kind = Expr::Str;
                e->text = t.text;
                return e;
            }
            case Tok::True:
            case Tok::False: {
                eat();
                e->kind = Expr::Bool;
                e->boolean = t.kind == Tok::True;
                return e;
            }
            case Tok::Name: {
                eat();
                e->kind = Expr::NameRef;
                e->text = t.text;
                return e;
            }
            case Tok::LParen: {
                eat();
                ExprPtr inner = expression();
                expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::LBracket: {
                eat();
                e->kind = Expr::ListLit;
                while (!at(Tok::RBracket)) {
                    e->items.push_back(expression());
                    if (!at(Tok::RBracket)) expect(Tok::Comma, "','");
                }
                eat();
                return e;
            }
            default:
                fail("SyntaxError", "expected an expression, found '" + t.text + "'", t.span);
        }
    }

    std::vector<Token> toks_;
    size_t pos_ = 0;
};

}  // namespace detail

/// Parse a MetaDSL program (optional header block skipped) into an Ast.
inline Ast parse_program(const std::string& text) {
    detail::Lexer lexer(text);
    detail::Parser parser(lexer.run());
    Ast ast{parser.parse_module(), text};

    int defs = 0;
    for (auto& s : ast.statements)
        if (s->kind == Stmt::FunctionDef && s->name == "make_structure") ++defs;
    if (defs != 1)
        fail("SyntaxError",
             defs == 0 ? "program must define make_structure" : "multiple make_structure definitions",
             {1, 1});
    return ast;
}

/// Design parameters of make_structure, in declaration order.
inline std::vector<ParamSpec> list_params(const Ast& ast) {
    std::vector<ParamSpec> out;
    for (auto& s : ast.statements) {
        if (s->kind != Stmt::FunctionDef || s->name != "make_structure") continue;
        int order = 0;
        for (auto& [name, def] : s->params) {
            if (!def) fail("MissingDefault", "parameter '" + name + "' has no default value", s->span);
            // numeric literal, optionally signed
            const Expr* e = def.get();
            double sign = 1;
            while (e->kind == Expr::Unary) {
                if (e->text == "-") sign = -sign;
                e = e->a.get();
            }
            if (e->kind != Expr::Num)
                fail("MissingDefault", "parameter '" + name + "' needs a numeric default",
                     def->span);
            if (!std::isfinite(e->number))
                fail("MissingDefault", "parameter '" + name + "' default must be finite", def->span);
            out.push_back({name, sign * e->number, order++});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Interpreter

struct Value;
using ValuePtr = std::shared_ptr<Value>;

/// Chain of Custom pattern operations under construction.
struct PatternChain {
    std::vector<assembly::CustomOp> ops;
};

struct Value {
    using List = std::vector<Value>;
    using Builtin = std::function<Value(const std::vector<Value>&,
                                        const std::vector<std::pair<std::string, Value>>&,
                                        SourceSpan)>;

    struct RangeVal {
        long start, stop, step;
    };
    struct FunctionVal {
        const Stmt* def;
    };
    struct CpNamespace {
        cp::PolytopeKind kind;
    };
    struct CpCategory {
        cp::PolytopeKind kind;
        cp::EntityCategory category;
    };
    struct BoundMethod {
        cp::PolytopeKind kind;
        std::string name;  // embed / embed_via_minmax
    };

    std::variant<std::monostate, double, bool, std::string, std::shared_ptr<List>, RangeVal,
                 FunctionVal, std::shared_ptr<Builtin>, CpNamespace, CpCategory, BoundMethod,
                 cp::EntityRef, cp::VertexSpec, cp::PathSpec, cp::SkeletonSpec,
                 lifting::LiftedSkeleton, assembly::Embedding, assembly::PatternOp, PatternChain,
                 assembly::Tile, assembly::StructurePtr>
        data;

    bool is_int = false;  // numbers that came from integer literals / range

    Value() = default;
    template <typename T>
    Value(T v) : data(std::move(v)) {}

    static Value number(double v, bool integral = false) {
        Value out(v);
        out.is_int = integral;
        return out;
    }

    const char* type_name() const {
        struct Namer {
            const char* operator()(std::monostate) const { return "none"; }
            const char* operator()(double) const { return "number"; }
            const char* operator()(bool) const { return "bool"; }
            const char* operator()(const std::string&) const { return "string"; }
            const char* operator()(const std::shared_ptr<List>&) const { return "list"; }
            const char* operator()(const RangeVal&) const { return "range"; }
            const char* operator()(const FunctionVal&) const { return "function"; }
            const char* operator()(const std::shared_ptr<Builtin>&) const { return "builtin"; }
            const char* operator()(const CpNamespace&) const { return "convex polytope"; }
            const char* operator()(const CpCategory&) const { return "entity category"; }
            const char* operator()(const BoundMethod&) const { return "method"; }
            const char* operator()(const cp::EntityRef&) const { return "cp entity"; }
            const char* operator()(const cp::VertexSpec&) const { return "vertex"; }
            const char* operator()(const cp::PathSpec&) const { return "path"; }
            const char* operator()(const cp::SkeletonSpec&) const { return "skeleton"; }
            const char* operator()(const lifting::LiftedSkeleton&) const { return "lifted skeleton"; }
            const char* operator()(const assembly::Embedding&) const { return "embedding"; }
            const char* operator()(const assembly::PatternOp&) const { return "pattern"; }
            const char* operator()(const PatternChain&) const { return "pattern operation"; }
            const char* operator()(const assembly::Tile&) const { return "tile"; }
            const char* operator()(const assembly::StructurePtr&) const { return "structure"; }
        };
        return std::visit(Namer{}, data);
    }
};

struct EvalConfig {
    long step_limit = 1000000;
    int depth_limit = 64;
    lifting::ShellConfig shell;
};

namespace detail {

class Interpreter {
  public:
    Interpreter(const Ast& ast, const EvalConfig& cfg) : ast_(ast), cfg_(cfg) {
        install_builtins();
    }

    assembly::StructurePtr evaluate(const std::map<std::string, double>& overrides) {
        // module top level
        for (auto& s : ast_.statements) exec_toplevel(*s);

        const Stmt* make_structure = nullptr;
        for (auto& s : ast_.statements)
            if (s->kind == Stmt::FunctionDef && s->name == "make_structure")
                make_structure = s.get();
        if (!make_structure) fail("NameError", "make_structure is not defined", {1, 1});

        for (auto& [name, v] : overrides) {
            bool known = false;
            for (auto& [pname, unused] : make_structure->params) known |= pname == name;
            if (!known)
                fail("NameError", "override names unknown parameter '" + name + "'", {1, 1});
        }

        std::vector<std::pair<std::string, Value>> kwargs;
        for (auto& [name, v] : overrides) kwargs.emplace_back(name, Value::number(v));
        Value result = call_function(make_structure, {}, kwargs, make_structure->span);
        if (!std::holds_alternative<assembly::StructurePtr>(result.data))
            fail("TypeError",
                 std::string("make_structure must return a Structure, got ") + result.type_name(),
                 make_structure->span);
        return std::get<assembly::StructurePtr>(result.data);
    }

  private:
    using Scope = std::map<std::string, Value>;

    struct ReturnSignal {
        Value value;
    };

    void tick(SourceSpan span) {
        if (++steps_ > cfg_.step_limit)
            fail("StepLimit", "interpreted step limit exceeded", span);
    }

    void exec_toplevel(const Stmt& s) {
        switch (s.kind) {
            case Stmt::ImportMetagen: return;  // builtins are always bound
            case Stmt::FunctionDef:
                globals_[s.name] = Value(Value::FunctionVal{&s});
                return;
            default:
                exec(s, globals_);
        }
    }

    void exec_block(const std::vector<StmtPtr>& body, Scope& scope) {
        for (auto& s : body) exec(*s, scope);
    }

    void exec(const Stmt& s, Scope& scope) {
        tick(s.span);
        switch (s.kind) {
            case Stmt::ImportMetagen:
                fail("SyntaxError", "imports are only allowed at the top level", s.span);
            case Stmt::FunctionDef:
                globals_[s.name] = Value(Value::FunctionVal{&s});
                return;
            case Stmt::Assign:
                scope[s.name] = eval(*s.value, scope);
                return;
            case Stmt::ExprStmt:
                eval(*s.value, scope);
                return;
            case Stmt::Return:
                throw ReturnSignal{s.value ? eval(*s.value, scope) : Value{}};
            case Stmt::For: {
                Value iterable = eval(*s.value, scope);
                if (auto* r = std::get_if<Value::RangeVal>(&iterable.data)) {
                    for (long i = r->start; (r->step > 0) ? i < r->stop : i > r->stop;
                         i += r->step) {
                        tick(s.span);
                        scope[s.name] = Value::number(double(i), true);
                        exec_block(s.body, scope);
                    }
                } else if (auto* l =
                               std::get_if<std::shared_ptr<Value::List>>(&iterable.data)) {
                    // index-based so the body may append to the list it loops over
                    auto list = *l;
                    for (size_t idx = 0; idx < list->size(); ++idx) {
                        tick(s.span);
                        scope[s.name] = (*list)[idx];
                        exec_block(s.body, scope);
                    }
                } else {
                    fail("TypeError",
                         std::string("for loops iterate over range(...) or lists, got ") +
                             iterable.type_name(),
                         s.span);
                }
                return;
            }
            case Stmt::If: {
                for (auto& [cond, body] : s.arms) {
                    if (truthy(eval(*cond, scope), cond->span)) {
                        exec_block(body, scope);
                        return;
                    }
                }
                exec_block(s.else_body, scope);
                return;
            }
        }
    }

    bool truthy(const Value& v, SourceSpan span) {
        if (auto* b = std::get_if<bool>(&v.data)) return *b;
        if (auto* d = std::get_if<double>(&v.data)) return *d != 0.0;
        fail("TypeError", std::string("condition must be a bool or number, got ") + v.type_name(),
             span);
    }

    Value eval(const Expr& e, Scope& scope) {
        tick(e.span);
        switch (e.kind) {
            case Expr::Num: return Value::number(e.number, e.is_int_literal);
            case Expr::Str: return Value(e.text);
            case Expr::Bool: return Value(e.boolean);
            case Expr::NameRef: {
                auto it = scope.find(e.text);
                if (it != scope.end()) return it->second;
                auto g = globals_.find(e.text);
                if (g != globals_.end()) return g->second;
                auto b = builtins_.find(e.text);
                if (b != builtins_.end()) return b->second;
                fail("NameError", "name '" + e.text + "' is not defined", e.span);
            }
            case Expr::ListLit: {
                auto list = std::make_shared<Value::List>();
                for (auto& item : e.items) list->push_back(eval(*item, scope));
                return Value(list);
            }
            case Expr::Attribute: return eval_attribute(e, scope);
            case Expr::Index: {
                Value obj = eval(*e.a, scope);
                Value idx = eval(*e.b, scope);
                auto* l = std::get_if<std::shared_ptr<Value::List>>(&obj.data);
                if (!l)
                    fail("TypeError", std::string("only lists can be indexed, got ") +
                                          obj.type_name(),
                         e.span);
                auto* d = std::get_if<double>(&idx.data);
                if (!d || *d != std::floor(*d))
                    fail("TypeError", "list index must be an integer", e.span);
                long i = long(*d);
                long n = long((*l)->size());
                if (i < 0) i += n;
                if (i < 0 || i >= n) fail("TypeError", "list index out of range", e.span);
                return (**l)[size_t(i)];
            }
            case Expr::Unary: {
                Value v = eval(*e.a, scope);
                auto* d = std::get_if<double>(&v.data);
                if (!d)
                    fail("TypeError", std::string("unary '") + e.text + "' needs a number, got " +
                                          v.type_name(),
                         e.span);
                return Value::number(e.text == "-" ? -*d : *d, v.is_int);
            }
            case Expr::Binary: return eval_binary(e, scope);
            case Expr::Compare: return eval_compare(e, scope);
            case Expr::Call: return eval_call(e, scope);
        }
        fail("Internal", "unhandled expression", e.span);
    }

    Value eval_attribute(const Expr& e, Scope& scope) {
        Value obj = eval(*e.a, scope);
        if (auto* ns = std::get_if<Value::CpNamespace>(&obj.data)) {
            if (e.text == "corners")
                return Value(Value::CpCategory{ns->kind, cp::EntityCategory::Corner});
            if (e.text == "edges")
                return Value(Value::CpCategory{ns->kind, cp::EntityCategory::Edge});
            if (e.text == "faces")
                return Value(Value::CpCategory{ns->kind, cp::EntityCategory::Face});
            if (e.text == "interior")
                fail("NotImplemented",
                     "interior entities are not available in this MetaDSL version", e.span);
            if (e.text == "embed" || e.text == "embed_via_minmax")
                return Value(Value::BoundMethod{ns->kind, e.text});
            fail("TypeError", std::string(cp::kind_name(ns->kind)) + " has no attribute '" +
                                  e.text + "'",
                 e.span);
        }
        if (auto* cat = std::get_if<Value::CpCategory>(&obj.data)) {
            try {
                return Value(cp::resolve_entity(cat->kind, cat->category, e.text));
            } catch (Error& err) {
                err.set_span(e.span);
                throw;
            }
        }
        if (auto* list = std::get_if<std::shared_ptr<Value::List>>(&obj.data)) {
            if (e.text == "append") {
                auto target = *list;
                return Value(std::make_shared<Value::Builtin>(
                    [target](const std::vector<Value>& args,
                             const std::vector<std::pair<std::string, Value>>& kwargs,
                             SourceSpan span) {
                        if (args.size() != 1 || !kwargs.empty())
                            fail("TypeError", "append() takes exactly one argument", span);
                        target->push_back(args[0]);
                        return Value{};
                    }));
            }
            fail("TypeError", "lists only support append()", e.span);
        }
        fail("TypeError", std::string(obj.type_name()) + " has no attributes", e.span);
    }

    Value eval_binary(const Expr& e, Scope& scope) {
        Value a = eval(*e.a, scope), b = eval(*e.b, scope);
        auto* da = std::get_if<double>(&a.data);
        auto* db = std::get_if<double>(&b.data);
        if (!da || !db)
            fail("TypeError", "arithmetic needs numbers, got " + std::string(a.type_name()) +
                                  " and " + b.type_name(),
                 e.span);
        bool both_int = a.is_int && b.is_int;
        if (e.text == "+") return Value::number(*da + *db, both_int);
        if (e.text == "-") return Value::number(*da - *db, both_int);
        if (e.text == "*") return Value::number(*da * *db, both_int);
        if (e.text == "/") {
            if (*db == 0) fail("TypeError", "division by zero", e.span);
            return Value::number(*da / *db, false);
        }
        if (e.text == "**") return Value::number(std::pow(*da, *db), false);
        fail("Internal", "unknown operator " + e.text, e.span);
    }

    Value eval_compare(const Expr& e, Scope& scope) {
        Value a = eval(*e.a, scope), b = eval(*e.b, scope);
        auto* da = std::get_if<double>(&a.data);
        auto* db = std::get_if<double>(&b.data);
        if (da && db) {
            if (e.text == "==") return Value(*da == *db);
            if (e.text == "!=") return Value(*da != *db);
            if (e.text == "<") return Value(*da < *db);
            if (e.text == "<=") return Value(*da <= *db);
            if (e.text == ">") return Value(*da > *db);
            if (e.text == ">=") return Value(*da >= *db);
        }
        auto* sa = std::get_if<std::string>(&a.data);
        auto* sb = std::get_if<std::string>(&b.data);
        if (sa && sb && (e.text == "==" || e.text == "!="))
            return Value((*sa == *sb) == (e.text == "=="));
        auto* ba = std::get_if<bool>(&a.data);
        auto* bb = std::get_if<bool>(&b.data);
        if (ba && bb && (e.text == "==" || e.text == "!="))
            return Value((*ba == *bb) == (e.text == "=="));
        fail("TypeError", "cannot compare " + std::string(a.type_name()) + " and " + b.type_name(),
             e.span);
    }

    Value eval_call(const Expr& e, Scope& scope) {
        Value fn = eval(*e.a, scope);
        std::vector<Value> args;
        for (auto& a : e.items) args.push_back(eval(*a, scope));
        std::vector<std::pair<std::string, Value>> kwargs;
        for (auto& [name, a] : e.kwargs) kwargs.emplace_back(name, eval(*a, scope));

        if (auto* b = std::get_if<std::shared_ptr<Value::Builtin>>(&fn.data))
            return (**b)(args, kwargs, e.span);
        if (auto* f = std::get_if<Value::FunctionVal>(&fn.data))
            return call_function(f->def, args, kwargs, e.span);
        if (auto* m = std::get_if<Value::BoundMethod>(&fn.data)) return call_embed(*m, args, kwargs, e.span);
        fail("TypeError", std::string("value of type ") + fn.type_name() + " is not callable",
             e.span);
    }

    Value call_function(const Stmt* def, const std::vector<Value>& args,
                        const std::vector<std::pair<std::string, Value>>& kwargs, SourceSpan span) {
        if (++depth_ > cfg_.depth_limit) {
            --depth_;
            fail("DepthLimit", "call depth limit exceeded", span);
        }
        Scope locals;
        if (args.size() > def->params.size())
            fail("TypeError", def->name + "() takes at most " +
                                  std::to_string(def->params.size()) + " arguments",
                 span);
        for (size_t i = 0; i < args.size(); ++i) locals[def->params[i].first] = args[i];
        for (auto& [name, v] : kwargs) {
            bool known = false;
            for (auto& [pname, unused] : def->params) known |= pname == name;
            if (!known)
                fail("TypeError", def->name + "() got an unexpected keyword argument '" + name + "'",
                     span);
            if (locals.count(name))
                fail("TypeError", def->name + "() got multiple values for '" + name + "'", span);
            locals[name] = v;
        }
        for (auto& [pname, pdefault] : def->params) {
            if (locals.count(pname)) continue;
            if (!pdefault)
                fail("TypeError", def->name + "() missing required argument '" + pname + "'", span);
            locals[pname] = eval(*pdefault, globals_);
        }
        Value result;
        try {
            exec_block(def->body, locals);
        } catch (ReturnSignal& r) {
            result = std::move(r.value);
        }
        --depth_;
        return result;
    }

    // -- builtin plumbing ---------------------------------------------------

    struct ArgPack {
        std::vector<Value> positional;
        std::vector<std::pair<std::string, Value>> keywords;
        SourceSpan span;

        /// Bind against named parameters; unknown keywords are hard errors.
        std::vector<Value> bind(const std::string& fn, const std::vector<std::string>& names,
                                size_t required,
                                const std::map<std::string, std::string>& aliases = {}) const {
            std::vector<Value> bound(names.size());
            std::vector<bool> set(names.size(), false);
            if (positional.size() > names.size())
                fail("TypeError",
                     fn + "() takes at most " + std::to_string(names.size()) + " arguments, got " +
                         std::to_string(positional.size()),
                     span);
            for (size_t i = 0; i < positional.size(); ++i) {
                bound[i] = positional[i];
                set[i] = true;
            }
            for (auto& [name, v] : keywords) {
                std::string canonical = name;
                auto alias = aliases.find(name);
                if (alias != aliases.end()) canonical = alias->second;
                auto it = std::find(names.begin(), names.end(), canonical);
                if (it == names.end())
                    fail("TypeError", fn + "() got an unexpected keyword argument '" + name + "'",
                         span);
                size_t idx = size_t(it - names.begin());
                if (set[idx])
                    fail("TypeError", fn + "() got multiple values for '" + canonical + "'", span);
                bound[idx] = v;
                set[idx] = true;
            }
            for (size_t i = 0; i < required; ++i)
                if (!set[i])
                    fail("TypeError", fn + "() missing required argument '" + names[i] + "'", span);
            return bound;
        }
    };

    static double want_number(const Value& v, const std::string& what, SourceSpan span) {
        if (auto* d = std::get_if<double>(&v.data)) return *d;
        fail("TypeError", what + " must be a number, got " + v.type_name(), span);
    }

    static bool want_bool(const Value& v, const std::string& what, SourceSpan span) {
        if (auto* b = std::get_if<bool>(&v.data)) return *b;
        fail("TypeError", what + " must be True or False, got " + v.type_name(), span);
    }

    static const Value::List& want_list(const Value& v, const std::string& what, SourceSpan span) {
        if (auto* l = std::get_if<std::shared_ptr<Value::List>>(&v.data)) return **l;
        fail("TypeError", what + " must be a list, got " + v.type_name(), span);
    }

    static cp::EntityRef want_entity(const Value& v, const std::string& what, SourceSpan span) {
        if (auto* e = std::get_if<cp::EntityRef>(&v.data)) return *e;
        fail("TypeError", what + " must be a CP entity, got " + v.type_name(), span);
    }

    template <typename F>
    Value guarded(SourceSpan span, F&& f) {
        try {
            return f();
        } catch (Error& err) {
            if (!err.span().valid()) err.set_span(span);
            throw;
        }
    }

    void install_builtins() {
        auto add = [&](const std::string& name, Value::Builtin fn) {
            builtins_[name] = Value(std::make_shared<Value::Builtin>(std::move(fn)));
        };

        builtins_["cuboid"] = Value(Value::CpNamespace{cp::PolytopeKind::Cuboid});
        builtins_["triPrism"] = Value(Value::CpNamespace{cp::PolytopeKind::TriPrism});
        builtins_["tet"] = Value(Value::CpNamespace{cp::PolytopeKind::Tet});

        add("range", [](const std::vector<Value>& args,
                        const std::vector<std::pair<std::string, Value>>& kwargs, SourceSpan span) {
            if (!kwargs.empty()) fail("TypeError", "range() takes no keyword arguments", span);
            auto as_long = [&](const Value& v) {
                auto* d = std::get_if<double>(&v.data);
                if (!d || *d != std::floor(*d))
                    fail("TypeError", "range() arguments must be integers", span);
                return long(*d);
            };
            if (args.empty() || args.size() > 3)
                fail("TypeError", "range() takes 1 to 3 arguments", span);
            long start = 0, stop = 0, step = 1;
            if (args.size() == 1) stop = as_long(args[0]);
            if (args.size() >= 2) {
                start = as_long(args[0]);
                stop = as_long(args[1]);
            }
            if (args.size() == 3) step = as_long(args[2]);
            if (step == 0) fail("TypeError", "range() step must not be zero", span);
            return Value(Value::RangeVal{start, stop, step});
        });

        add("vertex", [this](const std::vector<Value>& args,
                             const std::vector<std::pair<std::string, Value>>& kwargs,
                             SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("vertex", {"cpEntity", "t"}, 1);
            auto entity = want_entity(bound[0], "cpEntity", span);
            std::vector<double> t;
            if (!std::holds_alternative<std::monostate>(bound[1].data)) {
                for (auto& item : want_list(bound[1], "t", span))
                    t.push_back(want_number(item, "t entry", span));
            }
            return guarded(span, [&] { return Value(cp::make_vertex(entity, t)); });
        });

        auto make_path_builtin = [this](bool smooth, std::string name) {
            return [this, smooth, name](const std::vector<Value>& args,
                                        const std::vector<std::pair<std::string, Value>>& kwargs,
                                        SourceSpan span) {
                ArgPack pack{args, kwargs, span};
                auto bound = pack.bind(name, {"ordered_verts"}, 1);
                std::vector<cp::VertexSpec> verts;
                for (auto& item : want_list(bound[0], "ordered_verts", span)) {
                    if (auto* v = std::get_if<cp::VertexSpec>(&item.data))
                        verts.push_back(*v);
                    else
                        fail("TypeError", name + "() expects vertices, got " +
                                              std::string(item.type_name()),
                             span);
                }
                return guarded(span, [&] { return Value(cp::make_path(verts, smooth)); });
            };
        };
        add("Polyline", make_path_builtin(false, "Polyline"));
        add("Curve", make_path_builtin(true, "Curve"));

        add("skeleton", [this](const std::vector<Value>& args,
                               const std::vector<std::pair<std::string, Value>>& kwargs,
                               SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("skeleton", {"entities"}, 1);
            std::vector<cp::SkeletonItem> items;
            for (auto& item : want_list(bound[0], "entities", span)) {
                if (auto* v = std::get_if<cp::VertexSpec>(&item.data))
                    items.push_back({*v, {}});
                else if (auto* p = std::get_if<cp::PathSpec>(&item.data))
                    items.push_back({{}, *p});
                else
                    fail("TypeError", std::string("skeleton() expects vertices or paths, got ") +
                                          item.type_name(),
                         span);
            }
            return guarded(span, [&] { return Value(cp::build_skeleton(items)); });
        });

        auto want_skeleton = [](const Value& v, SourceSpan span) {
            if (auto* s = std::get_if<cp::SkeletonSpec>(&v.data)) return *s;
            fail("TypeError", std::string("skel must be a skeleton, got ") + v.type_name(), span);
        };

        add("UniformBeams", [this, want_skeleton](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("UniformBeams", {"skel", "thickness"}, 2);
            auto skel = want_skeleton(bound[0], span);
            double d = want_number(bound[1], "thickness", span);
            return guarded(span, [&] { return Value(lifting::lift_uniform_beams(skel, d)); });
        });

        add("SpatiallyVaryingBeams", [this, want_skeleton](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("SpatiallyVaryingBeams", {"skel", "thicknessProfile"}, 2);
            auto skel = want_skeleton(bound[0], span);
            lifting::ThicknessProfile profile;
            for (auto& row : want_list(bound[1], "thicknessProfile", span)) {
                const auto& pair = want_list(row, "thicknessProfile entry", span);
                if (pair.size() != 2)
                    fail("TypeError", "thicknessProfile entries are [t, thickness] pairs", span);
                profile.samples.emplace_back(want_number(pair[0], "profile t", span),
                                             want_number(pair[1], "profile thickness", span));
            }
            return guarded(span, [&] { return Value(lifting::lift_varying_beams(skel, profile)); });
        });

        add("Spheres", [this, want_skeleton](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Spheres", {"skel", "thickness"}, 2);
            auto skel = want_skeleton(bound[0], span);
            double r = want_number(bound[1], "thickness", span);
            return guarded(span, [&] { return Value(lifting::lift_spheres(skel, r)); });
        });

        auto shell_builtin = [this, want_skeleton](cp::LiftKind kind, std::string name) {
            return [this, want_skeleton, kind, name](auto args, auto kwargs, SourceSpan span) {
                ArgPack pack{args, kwargs, span};
                auto bound = pack.bind(name, {"skel", "thickness"}, 2);
                auto skel = want_skeleton(bound[0], span);
                double t = want_number(bound[1], "thickness", span);
                return guarded(span,
                               [&] { return Value(lifting::lift_shell(skel, kind, t, cfg_.shell)); });
            };
        };
        add("UniformDirectShell", shell_builtin(cp::LiftKind::UniformDirectShell, "UniformDirectShell"));
        add("UniformTPMSShellViaMixedMinimal",
            shell_builtin(cp::LiftKind::UniformTPMSShellViaMixedMinimal,
                          "UniformTPMSShellViaMixedMinimal"));
        add("UniformTPMSShellViaConjugation",
            shell_builtin(cp::LiftKind::UniformTPMSShellViaConjugation,
                          "UniformTPMSShellViaConjugation"));

        add("Tile", [this](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Tile", {"lifted_skeletons", "embedding"}, 2);
            std::vector<lifting::LiftedSkeleton> lifts;
            for (auto& item : want_list(bound[0], "lifted_skeletons", span)) {
                if (auto* l = std::get_if<lifting::LiftedSkeleton>(&item.data))
                    lifts.push_back(*l);
                else
                    fail("TypeError", std::string("Tile() expects lifted skeletons, got ") +
                                          item.type_name(),
                         span);
            }
            auto* emb = std::get_if<assembly::Embedding>(&bound[1].data);
            if (!emb)
                fail("TypeError", std::string("embedding must come from a CP embed() call, got ") +
                                      bound[1].type_name(),
                     span);
            return guarded(span, [&] { return Value(assembly::make_tile(lifts, *emb)); });
        });

        auto fixed_pattern = [](assembly::PatternOp::Kind kind, std::string name) {
            return [kind, name](auto args, auto kwargs, SourceSpan span) {
                if (!args.empty() || !kwargs.empty())
                    fail("TypeError", name + "() takes no arguments", span);
                assembly::PatternOp pat;
                pat.kind = kind;
                return Value(pat);
            };
        };
        add("TetFullMirror", fixed_pattern(assembly::PatternOp::TetFullMirror, "TetFullMirror"));
        add("TriPrismFullMirror",
            fixed_pattern(assembly::PatternOp::TriPrismFullMirror, "TriPrismFullMirror"));
        add("CuboidFullMirror",
            fixed_pattern(assembly::PatternOp::CuboidFullMirror, "CuboidFullMirror"));
        add("Identity", fixed_pattern(assembly::PatternOp::Identity, "Identity"));

        add("Custom", [](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Custom", {"patternOp"}, 1);
            auto* chain = std::get_if<PatternChain>(&bound[0].data);
            if (!chain)
                fail("TypeError",
                     std::string("Custom() expects a pattern operation, got ") +
                         bound[0].type_name(),
                     span);
            assembly::PatternOp pat;
            pat.kind = assembly::PatternOp::Custom;
            pat.chain = chain->ops;
            return Value(pat);
        });

        auto chain_tail = [](const Value& v, const std::string& name, SourceSpan span) {
            std::vector<assembly::CustomOp> tail;
            if (std::holds_alternative<std::monostate>(v.data)) return tail;
            if (auto* c = std::get_if<PatternChain>(&v.data)) return c->ops;
            fail("TypeError", name + "() patternOp must be a pattern operation, got " +
                                  std::string(v.type_name()),
                 span);
        };

        add("Mirror", [chain_tail](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Mirror", {"entity", "doCopy", "patternOp"}, 2);
            PatternChain chain;
            chain.ops.push_back({assembly::CustomOp::Mirror,
                                 {want_entity(bound[0], "entity", span)},
                                 want_bool(bound[1], "doCopy", span)});
            auto tail = chain_tail(bound[2], "Mirror", span);
            chain.ops.insert(chain.ops.end(), tail.begin(), tail.end());
            return Value(chain);
        });

        add("Rotate180", [chain_tail](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Rotate180", {"entities", "doCopy", "patternOp"}, 2);
            std::vector<cp::EntityRef> axis;
            for (auto& item : want_list(bound[0], "entities", span))
                axis.push_back(want_entity(item, "axis entity", span));
            PatternChain chain;
            chain.ops.push_back(
                {assembly::CustomOp::Rotate180, axis, want_bool(bound[1], "doCopy", span)});
            auto tail = chain_tail(bound[2], "Rotate180", span);
            chain.ops.insert(chain.ops.end(), tail.begin(), tail.end());
            return Value(chain);
        });

        add("Translate", [chain_tail](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Translate", {"fromEntity", "toEntity", "doCopy", "patternOp"}, 3);
            PatternChain chain;
            chain.ops.push_back({assembly::CustomOp::Translate,
                                 {want_entity(bound[0], "fromEntity", span),
                                  want_entity(bound[1], "toEntity", span)},
                                 want_bool(bound[2], "doCopy", span)});
            auto tail = chain_tail(bound[3], "Translate", span);
            chain.ops.insert(chain.ops.end(), tail.begin(), tail.end());
            return Value(chain);
        });

        add("Structure", [this](auto args, auto kwargs, SourceSpan span) {
            ArgPack pack{args, kwargs, span};
            auto bound = pack.bind("Structure", {"tile", "pattern"}, 2);
            auto* tile = std::get_if<assembly::Tile>(&bound[0].data);
            if (!tile)
                fail("TypeError",
                     std::string("Structure() expects a tile, got ") + bound[0].type_name(), span);
            auto* pat = std::get_if<assembly::PatternOp>(&bound[1].data);
            if (!pat)
                fail("TypeError", std::string("Structure() expects a patterning procedure, got ") +
                                      bound[1].type_name(),
                     span);
            return guarded(span, [&] { return Value(assembly::StructureIR::make_leaf(*tile, *pat)); });
        });

        auto csg = [](assembly::StructureIR::Op op, std::string name) {
            return [op, name](auto args, auto kwargs, SourceSpan span) {
                ArgPack pack{args, kwargs, span};
                auto bound = pack.bind(name, {"A", "B"}, 2);
                auto* a = std::get_if<assembly::StructurePtr>(&bound[0].data);
                auto* b = std::get_if<assembly::StructurePtr>(&bound[1].data);
                if (!a || !b)
                    fail("TypeError", name + "() combines two Structures, got " +
                                          std::string(bound[0].type_name()) + " and " +
                                          bound[1].type_name(),
                         span);
                return Value(assembly::StructureIR::make_csg(op, *a, *b));
            };
        };
        add("Union", csg(assembly::StructureIR::Union, "Union"));
        add("Subtract", csg(assembly::StructureIR::Subtract, "Subtract"));
        add("Intersect", csg(assembly::StructureIR::Intersect, "Intersect"));
    }

    Value call_embed(const Value::BoundMethod& m, const std::vector<Value>& args,
                     const std::vector<std::pair<std::string, Value>>& kwargs, SourceSpan span) {
        ArgPack pack{args, kwargs, span};
        if (m.kind == cp::PolytopeKind::Cuboid && m.name == "embed") {
            // Both cornerAtAABBMin and cornerAtMinPt are accepted (API erratum).
            auto bound = pack.bind("cuboid.embed", {"width", "height", "depth", "cornerAtAABBMin"},
                                   4, {{"cornerAtMinPt", "cornerAtAABBMin"}});
            return guarded(span, [&] {
                return Value(assembly::embed_cuboid(
                    want_number(bound[0], "width", span), want_number(bound[1], "height", span),
                    want_number(bound[2], "depth", span),
                    want_entity(bound[3], "cornerAtAABBMin", span)));
            });
        }
        if (m.kind == cp::PolytopeKind::Cuboid && m.name == "embed_via_minmax") {
            auto bound =
                pack.bind("cuboid.embed_via_minmax", {"aabb_min_pt", "aabb_max_pt", "cornerAtAABBMin"},
                          3, {{"cornerAtMinPt", "cornerAtAABBMin"}});
            auto as_vec = [&](const Value& v, const char* what) {
                const auto& list = want_list(v, what, span);
                if (list.size() != 3) fail("TypeError", std::string(what) + " must have 3 entries", span);
                return Vec3{want_number(list[0], what, span), want_number(list[1], what, span),
                            want_number(list[2], what, span)};
            };
            return guarded(span, [&] {
                return Value(assembly::embed_via_minmax(as_vec(bound[0], "aabb_min_pt"),
                                                        as_vec(bound[1], "aabb_max_pt"),
                                                        want_entity(bound[2], "cornerAtAABBMin", span)));
            });
        }
        if (m.name == "embed") {
            auto bound = pack.bind(std::string(cp::kind_name(m.kind)) + ".embed",
                                   {"bounding_box_side_length"}, 1);
            return guarded(span, [&] {
                return Value(assembly::embed_simplex(
                    m.kind, want_number(bound[0], "bounding_box_side_length", span)));
            });
        }
        fail("TypeError", std::string(cp::kind_name(m.kind)) + " has no method '" + m.name + "'",
             span);
    }

    const Ast& ast_;
    const EvalConfig& cfg_;
    Scope globals_;
    Scope builtins_;
    long steps_ = 0;
    int depth_ = 0;
};

}  // namespace detail

/// Interpret make_structure with parameter overrides. Pure: two calls give
/// structurally identical results.
inline assembly::StructurePtr evaluate(const Ast& ast,
                                       const std::map<std::string, double>& overrides = {},
                                       const EvalConfig& cfg = {}) {
    detail::Interpreter interp(ast, cfg);
    return interp.evaluate(overrides);
}

}  // namespace metagen::frontend
