#include "sun/executor.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "sun/error.hpp"

namespace sun {

namespace {

using Row = std::vector<Value>;

struct WorkRow {
    const Row* left;
    const Row* right;  // null unless joined
};

struct ValueLess {
    bool operator()(const Value& a, const Value& b) const { return value_less(a, b); }
};

bool row_less(const ResultRow& a, const ResultRow& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
}

bool pred_holds(const Value& cell, CmpOp op, const Value& lit) {
    switch (op) {
        case CmpOp::eq: return cell == lit;
        case CmpOp::ne: return cell != lit;
        case CmpOp::gt: return std::get<double>(cell) > std::get<double>(lit);
        case CmpOp::lt: return std::get<double>(cell) < std::get<double>(lit);
    }
    return false;
}

class Evaluator {
 public:
    Evaluator(const SqlAst& ast, const DatabaseInstance& db, const SchemaDef& schema)
        : ast_(ast), db_(db), schema_(schema) {}

    ResultTable run() {
        std::vector<WorkRow> rows = scan();
        ResultTable out;
        const bool has_agg = std::any_of(ast_.select.begin(), ast_.select.end(),
                                         [](const AggExpr& e) { return e.fn != AggFn::none; });
        if (has_agg || ast_.group_by) {
            out = aggregate(rows);
        } else {
            out = project(rows);
        }
        if (ast_.order_by && ast_.order_by->limit && out.size() > *ast_.order_by->limit) {
            out.resize(*ast_.order_by->limit);
        }
        return out;
    }

 private:
    const Value& value_at(const WorkRow& row, std::size_t flat) const {
        const std::size_t t = schema_.col_table(flat);
        const std::size_t c = schema_.col_within_table(flat);
        if (t == ast_.from_table) return (*row.left)[c];
        return (*row.right)[c];
    }

    std::vector<WorkRow> scan() const {
        std::vector<WorkRow> rows;
        const auto& left_rows = db_.rows[ast_.from_table];
        if (!ast_.join) {
            for (const auto& l : left_rows) rows.push_back({&l, nullptr});
        } else {
            const auto& right_rows = db_.rows[ast_.join->table];
            const std::size_t lc = schema_.col_within_table(ast_.join->left_col);
            const std::size_t rc = schema_.col_within_table(ast_.join->right_col);
            for (const auto& l : left_rows) {
                for (const auto& r : right_rows) {
                    if (l[lc] == r[rc]) rows.push_back({&l, &r});
                }
            }
        }
        std::vector<WorkRow> filtered;
        for (const auto& row : rows) {
            bool keep = true;
            for (const auto& pred : ast_.where) {
                if (!pred_holds(value_at(row, pred.col), pred.op, pred.lit)) {
                    keep = false;
                    break;
                }
            }
            if (keep) filtered.push_back(row);
        }
        return filtered;
    }

    // count of empty input is 0, sum of empty input is 0; min/max/avg of
    // empty input drop the row (the toy domain has no NULL).
    std::optional<Value> agg_value(const AggExpr& e, const std::vector<WorkRow>& rows) const {
        const std::size_t n = rows.size();
        switch (e.fn) {
            case AggFn::count:
                return Value{static_cast<double>(n)};
            case AggFn::sum: {
                double s = 0.0;
                for (const auto& row : rows) s += std::get<double>(value_at(row, e.col));
                return Value{s};
            }
            case AggFn::avg: {
                if (n == 0) return std::nullopt;
                double s = 0.0;
                for (const auto& row : rows) s += std::get<double>(value_at(row, e.col));
                return Value{s / static_cast<double>(n)};
            }
            case AggFn::min:
            case AggFn::max: {
                if (n == 0) return std::nullopt;
                Value best = value_at(rows[0], e.col);
                for (std::size_t i = 1; i < n; ++i) {
                    const Value& v = value_at(rows[i], e.col);
                    const bool better = e.fn == AggFn::min ? value_less(v, best) : value_less(best, v);
                    if (better) best = v;
                }
                return best;
            }
            case AggFn::none:
                break;
        }
        throw data_error("bare column reached aggregate evaluation");
    }

    ResultTable project(const std::vector<WorkRow>& rows) const {
        struct Keyed {
            ResultRow row;
            Value key;
        };
        std::vector<Keyed> keyed;
        keyed.reserve(rows.size());
        for (const auto& row : rows) {
            Keyed k;
            for (const auto& item : ast_.select) k.row.push_back(value_at(row, item.col));
            if (ast_.order_by) k.key = value_at(row, ast_.order_by->key.col);
            keyed.push_back(std::move(k));
        }
        sort_rows(keyed);
        ResultTable out;
        out.reserve(keyed.size());
        for (auto& k : keyed) out.push_back(std::move(k.row));
        return out;
    }

    ResultTable aggregate(const std::vector<WorkRow>& rows) const {
        std::map<Value, std::vector<WorkRow>, ValueLess> groups;
        if (ast_.group_by) {
            for (const auto& row : rows) groups[value_at(row, *ast_.group_by)].push_back(row);
        } else {
            groups[Value{0.0}] = rows;  // single global group, possibly empty
        }

        struct Keyed {
            ResultRow row;
            Value key;
        };
        std::vector<Keyed> keyed;
        for (const auto& [key, members] : groups) {
            Keyed k;
            bool drop = false;
            for (const auto& item : ast_.select) {
                if (item.fn == AggFn::none) {
                    k.row.push_back(key);
                    continue;
                }
                auto v = agg_value(item, members);
                if (!v) {
                    drop = true;
                    break;
                }
                k.row.push_back(std::move(*v));
            }
            if (drop) continue;
            if (ast_.order_by) {
                const auto& okey = ast_.order_by->key;
                if (okey.fn == AggFn::none) {
                    k.key = key;
                } else {
                    auto v = agg_value(okey, members);
                    if (!v) continue;
                    k.key = std::move(*v);
                }
            }
            keyed.push_back(std::move(k));
        }
        sort_rows(keyed);
        ResultTable out;
        out.reserve(keyed.size());
        for (auto& k : keyed) out.push_back(std::move(k.row));
        return out;
    }

    template <typename Keyed>
    void sort_rows(std::vector<Keyed>& keyed) const {
        if (ast_.order_by) {
            const bool desc = ast_.order_by->dir == SortDir::desc;
            std::stable_sort(keyed.begin(), keyed.end(), [&](const Keyed& a, const Keyed& b) {
                if (a.key != b.key) return desc ? value_less(b.key, a.key) : value_less(a.key, b.key);
                return row_less(a.row, b.row);
            });
        } else {
            std::stable_sort(keyed.begin(), keyed.end(),
                             [](const Keyed& a, const Keyed& b) { return row_less(a.row, b.row); });
        }
    }

    const SqlAst& ast_;
    const DatabaseInstance& db_;
    const SchemaDef& schema_;
};

}  // namespace

ResultTable execute(const SqlAst& ast, const DatabaseInstance& db, const SchemaDef& schema) {
    validate_ast(ast, schema);
    return Evaluator(ast, db, schema).run();
}

bool results_equal(const ResultTable& a, const ResultTable& b) {
    return a == b;
}

}  // namespace sun
