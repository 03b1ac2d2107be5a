#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "sun/corpus.hpp"
#include "sun/error.hpp"
#include "sun/executor.hpp"
#include "sun/grammar.hpp"
#include "sun/rng.hpp"
#include "sun/sql_text.hpp"

namespace sun {

namespace {

struct AttrSpec {
    const char* name;
    ColType type;
};

struct DomainSpec {
    const char* parent;
    const char* child;
    const char* ref_col;
    AttrSpec parent_attrs[2];
    AttrSpec child_attrs[2];
};

const std::vector<DomainSpec>& domains() {
    static const std::vector<DomainSpec> banks = {
        {"singer", "concert", "singer_id",
         {{"age", ColType::number}, {"city", ColType::text}},
         {{"venue", ColType::text}, {"year", ColType::number}}},
        {"department", "employee", "dept_id",
         {{"budget", ColType::number}, {"city", ColType::text}},
         {{"role", ColType::text}, {"salary", ColType::number}}},
        {"team", "player", "team_id",
         {{"founded", ColType::number}, {"country", ColType::text}},
         {{"position", ColType::text}, {"rating", ColType::number}}},
        {"author", "book", "author_id",
         {{"birth_year", ColType::number}, {"country", ColType::text}},
         {{"genre", ColType::text}, {"price", ColType::number}}},
        {"customer", "invoice", "customer_id",
         {{"age", ColType::number}, {"city", ColType::text}},
         {{"status", ColType::text}, {"amount", ColType::number}}},
        {"course", "exam", "course_id",
         {{"credits", ColType::number}, {"topic", ColType::text}},
         {{"room", ColType::text}, {"score", ColType::number}}},
    };
    return banks;
}

SchemaDef make_schema(std::size_t index) {
    const DomainSpec& d = domains()[index % domains().size()];
    SchemaDef s;
    s.id = std::string(d.parent) + "_" + d.child + "_" + std::to_string(index);
    TableDef parent{d.parent,
                    {{"id", ColType::number},
                     {"name", ColType::text},
                     {d.parent_attrs[0].name, d.parent_attrs[0].type},
                     {d.parent_attrs[1].name, d.parent_attrs[1].type}}};
    TableDef child{d.child,
                   {{"id", ColType::number},
                    {d.ref_col, ColType::number},
                    {d.child_attrs[0].name, d.child_attrs[0].type},
                    {d.child_attrs[1].name, d.child_attrs[1].type}}};
    s.tables = {parent, child};
    s.foreign_keys = {{d.child, d.ref_col, d.parent, "id"}};
    s.validate();
    return s;
}

const std::vector<std::string>& pool_texts() {
    static std::vector<std::string> texts = [] {
        std::vector<std::string> out;
        for (const auto& v : literal_pool()) {
            if (!is_number(v)) out.push_back(std::get<std::string>(v));
        }
        return out;
    }();
    return texts;
}

DatabaseInstance make_rows(const SchemaDef& schema, std::size_t rows_per_table, Rng& rng) {
    DatabaseInstance db;
    db.schema_id = schema.id;
    db.rows.resize(schema.tables.size());
    const std::size_t parent_rows = rows_per_table;
    for (std::size_t t = 0; t < schema.tables.size(); ++t) {
        for (std::size_t r = 0; r < rows_per_table; ++r) {
            std::vector<Value> row;
            for (std::size_t c = 0; c < schema.tables[t].columns.size(); ++c) {
                const auto& col = schema.tables[t].columns[c];
                if (c == 0) {
                    row.push_back(Value{static_cast<double>(r + 1)});  // id
                } else if (t == 1 && c == 1) {
                    row.push_back(Value{static_cast<double>(1 + rng.bounded(parent_rows))});
                } else if (col.type == ColType::number) {
                    row.push_back(Value{static_cast<double>(1 + rng.bounded(25))});
                } else {
                    row.push_back(Value{pool_texts()[rng.bounded(pool_texts().size())]});
                }
            }
            db.rows[t].push_back(std::move(row));
        }
    }
    return db;
}

// --------------------------------------------------------------- intents

struct ColPicker {
    const SchemaDef& schema;
    Rng& rng;

    std::size_t any_col(std::size_t table) const {
        const std::size_t n = schema.tables[table].columns.size();
        return schema.flat_col(table, rng.bounded(n));
    }
    std::size_t typed_col(std::size_t table, ColType type) const {
        std::vector<std::size_t> options;
        for (std::size_t c = 0; c < schema.tables[table].columns.size(); ++c) {
            if (schema.tables[table].columns[c].type == type) {
                options.push_back(schema.flat_col(table, c));
            }
        }
        return options[rng.bounded(options.size())];
    }
    // prefers descriptive columns over ids for questions that read naturally
    std::size_t content_col(std::size_t table) const {
        const std::size_t n = schema.tables[table].columns.size();
        const std::size_t c = 1 + rng.bounded(n - 1);
        return schema.flat_col(table, c);
    }
};

Value pool_literal(ColType type, Rng& rng) {
    std::vector<std::size_t> options;
    const auto& pool = literal_pool();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (value_type(pool[i]) == type) options.push_back(i);
    }
    return pool[options[rng.bounded(options.size())]];
}

WherePred make_pred(const SchemaDef& schema, std::size_t table_a, std::size_t table_b, bool joined,
                    Rng& rng) {
    ColPicker pick{schema, rng};
    const std::size_t table = joined && rng.bounded(2) == 0 ? table_b : table_a;
    const std::size_t col = pick.content_col(table);
    const ColType type = schema.column(col).type;
    WherePred pred;
    pred.col = col;
    if (type == ColType::number) {
        const std::size_t roll = rng.bounded(4);
        pred.op = roll == 0 ? CmpOp::eq : roll == 1 ? CmpOp::ne : roll == 2 ? CmpOp::gt : CmpOp::lt;
    } else {
        pred.op = rng.bounded(3) == 0 ? CmpOp::ne : CmpOp::eq;
    }
    pred.lit = pool_literal(type, rng);
    return pred;
}

AggExpr make_agg(const SchemaDef& schema, std::size_t table, Rng& rng) {
    ColPicker pick{schema, rng};
    switch (rng.bounded(5)) {
        case 0: return AggExpr{AggFn::count, true, 0};
        case 1: return AggExpr{AggFn::sum, false, pick.typed_col(table, ColType::number)};
        case 2: return AggExpr{AggFn::avg, false, pick.typed_col(table, ColType::number)};
        case 3: return AggExpr{AggFn::min, false, pick.content_col(table)};
        default: return AggExpr{AggFn::max, false, pick.content_col(table)};
    }
}

SqlAst make_intent(const SchemaDef& schema, Rng& rng) {
    ColPicker pick{schema, rng};
    SqlAst ast;
    const std::size_t family = rng.bounded(12);
    const std::size_t table = rng.bounded(schema.tables.size());
    ast.from_table = table;

    if (family < 2) {  // plain select
        ast.select.push_back(AggExpr{AggFn::none, false, pick.content_col(table)});
        if (rng.bounded(2) == 0) {
            ast.select.push_back(AggExpr{AggFn::none, false, pick.content_col(table)});
        }
    } else if (family < 4) {  // aggregate
        ast.select.push_back(make_agg(schema, table, rng));
        if (rng.bounded(4) == 0) ast.select.push_back(make_agg(schema, table, rng));
    } else if (family < 6) {  // filtered select or aggregate
        if (rng.bounded(2) == 0) {
            ast.select.push_back(AggExpr{AggFn::none, false, pick.content_col(table)});
        } else {
            ast.select.push_back(make_agg(schema, table, rng));
        }
        ast.where.push_back(make_pred(schema, table, table, false, rng));
        if (rng.bounded(3) == 0) ast.where.push_back(make_pred(schema, table, table, false, rng));
    } else if (family < 8) {  // foreign-key join
        ast.from_table = 0;
        ast.join = JoinClause{1, schema.find_column(schema.tables[0].name, "id"),
                              schema.find_column(schema.tables[1].name, schema.foreign_keys[0].column)};
        if (rng.bounded(3) == 0) {
            ast.select.push_back(AggExpr{AggFn::count, true, 0});
        } else {
            ast.select.push_back(AggExpr{AggFn::none, false, pick.content_col(0)});
            ast.select.push_back(AggExpr{AggFn::none, false, pick.content_col(1)});
        }
        if (rng.bounded(2) == 0) ast.where.push_back(make_pred(schema, 0, 1, true, rng));
    } else if (family < 10) {  // group by
        const bool joined = rng.bounded(4) == 0;
        std::size_t gcol;
        if (joined) {
            ast.from_table = 0;
            ast.join = JoinClause{1, schema.find_column(schema.tables[0].name, "id"),
                                  schema.find_column(schema.tables[1].name, schema.foreign_keys[0].column)};
            gcol = pick.typed_col(0, ColType::text);
        } else {
            gcol = pick.typed_col(table, ColType::text);
        }
        const std::size_t agg_table = ast.join ? 1 : table;
        ast.select.push_back(AggExpr{AggFn::none, false, gcol});
        ast.select.push_back(rng.bounded(2) == 0 ? AggExpr{AggFn::count, true, 0}
                                                 : make_agg(schema, agg_table, rng));
        ast.group_by = gcol;
        if (rng.bounded(3) == 0) {
            ast.order_by = OrderClause{AggExpr{AggFn::count, true, 0},
                                       rng.bounded(2) == 0 ? SortDir::asc : SortDir::desc,
                                       std::nullopt};
            if (rng.bounded(2) == 0) ast.order_by->limit = std::uint32_t(rng.bounded(2) == 0 ? 3 : 5);
        }
    } else {  // order / limit
        ast.select.push_back(AggExpr{AggFn::none, false, pick.content_col(table)});
        OrderClause order;
        order.key = AggExpr{AggFn::none, false, pick.content_col(table)};
        order.dir = rng.bounded(2) == 0 ? SortDir::asc : SortDir::desc;
        switch (rng.bounded(4)) {
            case 0: break;
            case 1: order.limit = 1; break;
            case 2: order.limit = 3; break;
            default: order.limit = 5; break;
        }
        ast.order_by = order;
        if (rng.bounded(3) == 0) ast.where.push_back(make_pred(schema, table, table, false, rng));
    }
    validate_ast(ast, schema);
    return ast;
}

// --------------------------------------------------------- question text

std::vector<std::string> name_tokens(const std::string& name) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : name) {
        if (c == '_' || c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string number_token(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

class QuestionComposer {
 public:
    QuestionComposer(const SchemaDef& schema, const SqlAst& ast, Rng& rng)
        : schema_(schema), ast_(ast), rng_(rng) {}

    std::vector<std::string> compose(std::size_t arrangement) {
        std::vector<std::string> q;
        const bool has_group = ast_.group_by.has_value();
        const bool has_order = ast_.order_by.has_value();
        switch (arrangement % 5) {
            case 0:  // imperative
                append(q, verb_select());
                append(q, condition());
                append(q, grouping());
                append(q, ordering());
                break;
            case 1:  // interrogative
                append(q, {"what", plural() ? "are" : "is"});
                append(q, selection());
                append(q, source());
                append(q, condition());
                append(q, grouping());
                append(q, ordering());
                break;
            case 2:  // grouping clause first when present
                if (has_group) {
                    append(q, grouping());
                    append(q, verb_select());
                    append(q, condition());
                    append(q, ordering());
                } else {
                    append(q, verb_select());
                    append(q, ordering());
                    append(q, condition());
                }
                break;
            case 3:  // ordering clause first when present
                if (has_order) {
                    append(q, ordering());
                    append(q, verb_select());
                    append(q, condition());
                    append(q, grouping());
                } else {
                    append(q, {"please"});
                    append(q, verb_select());
                    append(q, condition());
                    append(q, grouping());
                }
                break;
            default:  // condition attached to the source
                append(q, {pick({"among", "considering"})});
                append(q, source_noun());
                append(q, condition());
                append(q, {pick({"show", "list", "report"})});
                append(q, selection());
                append(q, grouping());
                append(q, ordering());
                break;
        }
        return q;
    }

 private:
    using Tokens = std::vector<std::string>;

    static void append(Tokens& q, const Tokens& part) {
        q.insert(q.end(), part.begin(), part.end());
    }

    std::string pick(std::initializer_list<const char*> options) {
        auto it = options.begin();
        std::advance(it, rng_.bounded(options.size()));
        return *it;
    }

    bool plural() const {
        return ast_.select.size() > 1 || ast_.select[0].fn == AggFn::none;
    }

    Tokens col_tokens(std::size_t flat) const { return name_tokens(schema_.column(flat).name); }

    Tokens item_phrase(const AggExpr& e) {
        Tokens out;
        if (e.fn == AggFn::none) {
            out.push_back("the");
            append(out, col_tokens(e.col));
            return out;
        }
        if (e.fn == AggFn::count) {
            out = {"the", pick({"number", "count"}), "of"};
            if (e.star) {
                out.push_back(pick({"entries", "rows", "records"}));
            } else {
                append(out, col_tokens(e.col));
                out.push_back("values");
            }
            return out;
        }
        out.push_back("the");
        switch (e.fn) {
            case AggFn::sum: out.push_back(pick({"total", "combined"})); break;
            case AggFn::avg: out.push_back(pick({"average", "mean"})); break;
            case AggFn::min: out.push_back(pick({"lowest", "minimum", "smallest"})); break;
            case AggFn::max: out.push_back(pick({"highest", "maximum", "largest"})); break;
            default: break;
        }
        append(out, col_tokens(e.col));
        return out;
    }

    Tokens selection() {
        Tokens out;
        for (std::size_t i = 0; i < ast_.select.size(); ++i) {
            if (i) out.push_back("and");
            append(out, item_phrase(ast_.select[i]));
        }
        return out;
    }

    Tokens source_noun() {
        Tokens out;
        append(out, name_tokens(schema_.tables[ast_.from_table].name));
        if (ast_.join) {
            append(out, {pick({"entries", "records"}), pick({"joined", "matched", "paired"}), "with",
                         "their"});
            append(out, name_tokens(schema_.tables[ast_.join->table].name));
            out.push_back(pick({"entries", "records"}));
        } else {
            out.push_back(pick({"entries", "rows", "records"}));
        }
        return out;
    }

    Tokens source() {
        Tokens out = {pick({"of", "for", "across"})};
        out.push_back("all");
        append(out, source_noun());
        return out;
    }

    Tokens verb_select() {
        Tokens out = {pick({"show", "list", "display", "give", "find", "report"})};
        append(out, selection());
        append(out, source());
        return out;
    }

    Tokens condition() {
        Tokens out;
        for (std::size_t i = 0; i < ast_.where.size(); ++i) {
            append(out, {i == 0 ? pick({"whose", "where", "with"}) : "and", "the"});
            const auto& p = ast_.where[i];
            append(out, col_tokens(p.col));
            switch (p.op) {
                case CmpOp::eq: out.push_back(pick({"equals", "is"})); break;
                case CmpOp::ne: append(out, {"is", "not"}); break;
                case CmpOp::gt: append(out, rng_.bounded(2) == 0 ? Tokens{"is", "greater", "than"}
                                                                 : Tokens{"is", "above"}); break;
                case CmpOp::lt: append(out, rng_.bounded(2) == 0 ? Tokens{"is", "less", "than"}
                                                                 : Tokens{"is", "below"}); break;
            }
            if (is_number(p.lit)) {
                out.push_back(number_token(std::get<double>(p.lit)));
            } else {
                out.push_back(std::get<std::string>(p.lit));
            }
        }
        return out;
    }

    Tokens grouping() {
        Tokens out;
        if (!ast_.group_by) return out;
        if (rng_.bounded(2) == 0) {
            append(out, {"for", "each"});
        } else {
            out.push_back("per");
        }
        append(out, col_tokens(*ast_.group_by));
        return out;
    }

    Tokens ordering() {
        Tokens out;
        if (!ast_.order_by) return out;
        const auto& o = *ast_.order_by;
        append(out, {pick({"sorted", "ordered", "ranked"}), "by"});
        if (o.key.fn == AggFn::none) {
            append(out, col_tokens(o.key.col));
        } else {
            append(out, item_phrase(o.key));
        }
        append(out, {"in", o.dir == SortDir::asc ? pick({"ascending", "increasing"})
                                                 : pick({"descending", "decreasing"}),
                     "order"});
        if (o.limit) {
            append(out, {pick({"keeping", "taking"}), "only", "the", pick({"first", "top"}),
                         number_token(static_cast<double>(*o.limit))});
        }
        return out;
    }

    const SchemaDef& schema_;
    const SqlAst& ast_;
    Rng& rng_;
};

}  // namespace

Corpus generate_corpus(std::uint64_t seed, const GeneratorProfile& profile) {
    if (profile.num_schemas == 0 || profile.groups_per_schema == 0) {
        throw config_error("generator profile needs at least one schema and one group");
    }
    if (profile.paraphrases_min < 2 || profile.paraphrases_max < profile.paraphrases_min) {
        throw config_error("paraphrases_min must be >= 2 and <= paraphrases_max");
    }
    if (profile.singleton_fraction < 0.0 || profile.singleton_fraction >= 1.0) {
        throw config_error("singleton_fraction must lie in [0, 1)");
    }
    if (profile.rows_per_table == 0) throw config_error("rows_per_table must be positive");

    Corpus corpus;
    Rng rng(seed);

    for (std::size_t si = 0; si < profile.num_schemas; ++si) {
        SchemaDef schema = make_schema(si);

        // distinct canonical intents
        std::vector<SqlAst> intents;
        std::set<std::string> canon_keys;
        for (std::size_t g = 0; g < profile.groups_per_schema; ++g) {
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                SqlAst ast = make_intent(schema, rng);
                const std::string key = render_sql(canonicalize(ast, schema), schema);
                if (canon_keys.insert(key).second) {
                    intents.push_back(std::move(ast));
                    placed = true;
                }
            }
            if (!placed) {
                throw config_error("cannot realize " + std::to_string(profile.groups_per_schema) +
                                   " distinct intents for schema '" + schema.id + "'");
            }
        }

        // row data re-rolled so distinct intents separate on execution
        DatabaseInstance best_db;
        std::size_t best_collisions = SIZE_MAX;
        for (int attempt = 0; attempt < 10; ++attempt) {
            DatabaseInstance db = make_rows(schema, profile.rows_per_table, rng);
            std::map<std::string, std::size_t> result_keys;
            for (const auto& intent : intents) {
                std::ostringstream os;
                for (const auto& row : execute(intent, db, schema)) {
                    for (const auto& cell : row) {
                        if (is_number(cell)) {
                            os.precision(17);
                            os << std::get<double>(cell) << "|";
                        } else {
                            os << std::get<std::string>(cell) << "|";
                        }
                    }
                    os << ";";
                }
                ++result_keys[os.str()];
            }
            std::size_t collisions = 0;
            for (const auto& [key, count] : result_keys) collisions += count - 1;
            if (collisions < best_collisions) {
                best_collisions = collisions;
                best_db = std::move(db);
            }
            if (best_collisions == 0) break;
        }
        corpus.databases.push_back(std::move(best_db));

        // singleton selection: exactly round(fraction * groups) groups of size one
        const std::size_t singleton_count = static_cast<std::size_t>(
            std::llround(profile.singleton_fraction * static_cast<double>(intents.size())));
        std::vector<std::size_t> order(intents.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        std::vector<bool> is_singleton(intents.size(), false);
        for (std::size_t i = 0; i < singleton_count; ++i) is_singleton[order[i]] = true;

        for (std::size_t g = 0; g < intents.size(); ++g) {
            const SqlAst& ast = intents[g];
            const std::string group_id = schema.id + "_g" + std::to_string(g);
            const std::size_t k =
                is_singleton[g]
                    ? 1
                    : profile.paraphrases_min +
                          rng.bounded(profile.paraphrases_max - profile.paraphrases_min + 1);

            // distinct arrangements first, then wrap around
            std::vector<std::size_t> arrangements = {0, 1, 2, 3, 4};
            rng.shuffle(arrangements.begin(), arrangements.end());
            for (std::size_t m = 0; m < k; ++m) {
                ExampleRecord e;
                e.id = group_id + "_q" + std::to_string(m);
                e.schema_id = schema.id;
                e.group_id = group_id;
                e.gold_ast = ast;
                e.sql_text = render_sql(ast, schema);
                QuestionComposer composer(schema, ast, rng);
                e.question = composer.compose(arrangements[m % arrangements.size()]);
                if (m == 0 || is_singleton[g]) {
                    e.split = "train";
                } else {
                    const double r = rng.uniform01();
                    e.split = r < 0.70 ? "train" : r < 0.85 ? "dev" : "test";
                }
                corpus.examples.push_back(std::move(e));
            }
        }
        corpus.schemas.push_back(std::move(schema));
    }

    corpus.validate();
    return corpus;
}

}  // namespace sun
