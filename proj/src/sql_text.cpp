#include "sun/sql_text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "sun/error.hpp"

namespace sun {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string render_number(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string render_value(const Value& v) {
    if (is_number(v)) return render_number(std::get<double>(v));
    return "'" + std::get<std::string>(v) + "'";
}

const char* agg_name(AggFn fn) {
    switch (fn) {
        case AggFn::count: return "count";
        case AggFn::sum: return "sum";
        case AggFn::avg: return "avg";
        case AggFn::min: return "min";
        case AggFn::max: return "max";
        case AggFn::none: break;
    }
    return "";
}

// ------------------------------------------------------------------ lexer

struct Token {
    enum class Kind { word, number, text, punct, end };
    Kind kind = Kind::end;
    std::string value;
    std::size_t pos = 0;
};

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) {
                ++j;
            }
            out.push_back({Token::Kind::word, s.substr(i, j - i), i});
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i + 1;
            while (j < s.size() &&
                   (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) {
                ++j;
            }
            out.push_back({Token::Kind::number, s.substr(i, j - i), i});
            i = j;
            continue;
        }
        if (c == '\'') {
            const std::size_t close = s.find('\'', i + 1);
            if (close == std::string::npos) throw parse_error("unterminated string literal", i);
            out.push_back({Token::Kind::text, s.substr(i + 1, close - i - 1), i});
            i = close + 1;
            continue;
        }
        if (c == '!' && i + 1 < s.size() && s[i + 1] == '=') {
            out.push_back({Token::Kind::punct, "!=", i});
            i += 2;
            continue;
        }
        if (std::string("(),.*=<>").find(c) != std::string::npos) {
            out.push_back({Token::Kind::punct, std::string(1, c), i});
            ++i;
            continue;
        }
        throw parse_error(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back({Token::Kind::end, "", s.size()});
    return out;
}

// ------------------------------------------------------------------ parser

struct RawRef {
    std::string table;  // empty when unqualified
    std::string col;
    std::size_t pos = 0;
};

struct RawAgg {
    AggFn fn = AggFn::none;
    bool star = false;
    RawRef ref;
};

class Parser {
 public:
    Parser(const std::string& text, const SchemaDef& schema)
        : tokens_(tokenize(text)), schema_(schema) {}

    SqlAst parse() {
        expect_word("select");
        std::vector<RawAgg> select = {parse_item()};
        while (accept_punct(",")) select.push_back(parse_item());

        expect_word("from");
        const Token from_tok = expect(Token::Kind::word, "table name");
        SqlAst ast;
        ast.from_table = resolve_table(from_tok);

        if (accept_word("join")) {
            const Token join_tok = expect(Token::Kind::word, "table name");
            JoinClause join;
            join.table = resolve_table(join_tok);
            if (join.table == ast.from_table) {
                throw parse_error("self-join is outside the grammar", join_tok.pos);
            }
            expect_word("on");
            const RawRef a = parse_ref();
            expect_punct("=");
            const RawRef b = parse_ref();
            const std::size_t ca = resolve_col(a, ast);
            const std::size_t cb = resolve_col(b, ast);
            if (schema_.col_table(ca) == ast.from_table) {
                join.left_col = ca;
                join.right_col = cb;
            } else {
                join.left_col = cb;
                join.right_col = ca;
            }
            ast.join = join;
        }

        for (const auto& raw : select) {
            AggExpr e{raw.fn, raw.star, 0};
            if (!raw.star) e.col = resolve_col(raw.ref, ast);
            ast.select.push_back(e);
        }

        if (accept_word("where")) {
            do {
                WherePred pred;
                pred.col = resolve_col(parse_ref(), ast);
                pred.op = parse_op();
                pred.lit = parse_literal();
                ast.where.push_back(std::move(pred));
            } while (accept_word("and"));
        }

        if (accept_word("group")) {
            expect_word("by");
            ast.group_by = resolve_col(parse_ref(), ast);
        }

        if (accept_word("order")) {
            expect_word("by");
            OrderClause order;
            const RawAgg key = parse_item();
            order.key = AggExpr{key.fn, key.star, 0};
            if (!key.star) order.key.col = resolve_col(key.ref, ast);
            if (accept_word("asc")) {
                order.dir = SortDir::asc;
            } else if (accept_word("desc")) {
                order.dir = SortDir::desc;
            }
            if (accept_word("limit")) {
                const Token t = expect(Token::Kind::number, "limit value");
                const long v = std::strtol(t.value.c_str(), nullptr, 10);
                if (v <= 0) throw parse_error("limit must be positive", t.pos);
                order.limit = static_cast<std::uint32_t>(v);
            }
            ast.order_by = order;
        }

        if (peek().kind != Token::Kind::end) {
            throw parse_error("unexpected trailing input '" + peek().value + "'", peek().pos);
        }
        validate_ast(ast, schema_);
        return ast;
    }

 private:
    const Token& peek() const { return tokens_[idx_]; }
    const Token& advance() { return tokens_[idx_++]; }

    bool accept_word(const std::string& w) {
        if (peek().kind == Token::Kind::word && lower(peek().value) == w) {
            ++idx_;
            return true;
        }
        return false;
    }
    bool accept_punct(const std::string& p) {
        if (peek().kind == Token::Kind::punct && peek().value == p) {
            ++idx_;
            return true;
        }
        return false;
    }
    void expect_word(const std::string& w) {
        if (!accept_word(w)) {
            throw parse_error("expected '" + w + "', got '" + peek().value + "'", peek().pos);
        }
    }
    void expect_punct(const std::string& p) {
        if (!accept_punct(p)) {
            throw parse_error("expected '" + p + "', got '" + peek().value + "'", peek().pos);
        }
    }
    const Token& expect(Token::Kind kind, const char* what) {
        if (peek().kind != kind) {
            throw parse_error(std::string("expected ") + what + ", got '" + peek().value + "'",
                              peek().pos);
        }
        return advance();
    }

    static std::optional<AggFn> agg_of(const std::string& w) {
        const std::string l = lower(w);
        if (l == "count") return AggFn::count;
        if (l == "sum") return AggFn::sum;
        if (l == "avg") return AggFn::avg;
        if (l == "min") return AggFn::min;
        if (l == "max") return AggFn::max;
        return std::nullopt;
    }

    RawRef parse_ref() {
        const Token first = expect(Token::Kind::word, "column reference");
        RawRef ref;
        ref.pos = first.pos;
        if (accept_punct(".")) {
            const Token col = expect(Token::Kind::word, "column name");
            ref.table = first.value;
            ref.col = col.value;
        } else {
            ref.col = first.value;
        }
        return ref;
    }

    RawAgg parse_item() {
        RawAgg item;
        if (peek().kind == Token::Kind::word) {
            const auto fn = agg_of(peek().value);
            if (fn && tokens_[idx_ + 1].kind == Token::Kind::punct &&
                tokens_[idx_ + 1].value == "(") {
                advance();
                advance();
                item.fn = *fn;
                if (accept_punct("*")) {
                    item.star = true;
                } else {
                    item.ref = parse_ref();
                }
                expect_punct(")");
                return item;
            }
        }
        item.ref = parse_ref();
        return item;
    }

    CmpOp parse_op() {
        if (accept_punct("=")) return CmpOp::eq;
        if (accept_punct("!=")) return CmpOp::ne;
        if (accept_punct(">")) return CmpOp::gt;
        if (accept_punct("<")) return CmpOp::lt;
        throw parse_error("expected comparison operator, got '" + peek().value + "'", peek().pos);
    }

    Value parse_literal() {
        if (peek().kind == Token::Kind::number) {
            return Value{std::strtod(advance().value.c_str(), nullptr)};
        }
        if (peek().kind == Token::Kind::text) {
            return Value{advance().value};
        }
        throw parse_error("expected literal, got '" + peek().value + "'", peek().pos);
    }

    std::size_t resolve_table(const Token& t) {
        try {
            return schema_.table_index(t.value);
        } catch (const data_error& e) {
            throw parse_error(e.what(), t.pos);
        }
    }

    // Resolves within the query scope: the from table first, then the join table.
    std::size_t resolve_col(const RawRef& ref, const SqlAst& ast) {
        try {
            if (!ref.table.empty()) return schema_.find_column(ref.table, ref.col);
        } catch (const data_error& e) {
            throw parse_error(e.what(), ref.pos);
        }
        const std::string needle = lower(ref.col);
        std::vector<std::size_t> scope = {ast.from_table};
        if (ast.join) scope.push_back(ast.join->table);
        for (std::size_t t : scope) {
            for (std::size_t c = 0; c < schema_.tables[t].columns.size(); ++c) {
                if (lower(schema_.tables[t].columns[c].name) == needle) {
                    return schema_.flat_col(t, c);
                }
            }
        }
        throw parse_error("unknown column '" + ref.col + "' in query scope", ref.pos);
    }

    std::vector<Token> tokens_;
    const SchemaDef& schema_;
    std::size_t idx_ = 0;
};

}  // namespace

std::string render_sql(const SqlAst& ast, const SchemaDef& schema) {
    const bool qualified = ast.join.has_value();
    auto ref = [&](std::size_t flat) {
        const std::string& col = schema.column(flat).name;
        if (!qualified) return col;
        return schema.tables[schema.col_table(flat)].name + "." + col;
    };
    auto item = [&](const AggExpr& e) -> std::string {
        if (e.fn == AggFn::none) return ref(e.col);
        if (e.star) return std::string(agg_name(e.fn)) + "(*)";
        return std::string(agg_name(e.fn)) + "(" + ref(e.col) + ")";
    };

    std::ostringstream os;
    os << "SELECT ";
    for (std::size_t i = 0; i < ast.select.size(); ++i) {
        if (i) os << ", ";
        os << item(ast.select[i]);
    }
    os << " FROM " << schema.tables[ast.from_table].name;
    if (ast.join) {
        os << " JOIN " << schema.tables[ast.join->table].name << " ON " << ref(ast.join->left_col)
           << " = " << ref(ast.join->right_col);
    }
    if (!ast.where.empty()) {
        os << " WHERE ";
        for (std::size_t i = 0; i < ast.where.size(); ++i) {
            if (i) os << " AND ";
            const auto& p = ast.where[i];
            const char* op = p.op == CmpOp::eq   ? "="
                             : p.op == CmpOp::ne ? "!="
                             : p.op == CmpOp::gt ? ">"
                                                 : "<";
            os << ref(p.col) << " " << op << " " << render_value(p.lit);
        }
    }
    if (ast.group_by) os << " GROUP BY " << ref(*ast.group_by);
    if (ast.order_by) {
        os << " ORDER BY " << item(ast.order_by->key)
           << (ast.order_by->dir == SortDir::asc ? " ASC" : " DESC");
        if (ast.order_by->limit) os << " LIMIT " << *ast.order_by->limit;
    }
    return os.str();
}

SqlAst parse_sql(const std::string& text, const SchemaDef& schema) {
    Parser parser(text, schema);
    return parser.parse();
}

}  // namespace sun
