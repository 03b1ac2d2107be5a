#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sun/error.hpp"
#include "sun/executor.hpp"
#include "sun/grammar.hpp"
#include "sun/rng.hpp"
#include "sun/schema.hpp"
#include "sun/sql_ast.hpp"
#include "sun/sql_text.hpp"

using namespace sun;

namespace {

SchemaDef concert_schema() {
    SchemaDef s;
    s.id = "concerts";
    s.tables = {
        {"singer",
         {{"id", ColType::number},
          {"name", ColType::text},
          {"age", ColType::number},
          {"city", ColType::text}}},
        {"concert",
         {{"id", ColType::number},
          {"singer_id", ColType::number},
          {"venue", ColType::text},
          {"year", ColType::number}}},
    };
    s.foreign_keys = {{"concert", "singer_id", "singer", "id"}};
    s.validate();
    return s;
}

// flat columns: singer 0:id 1:name 2:age 3:city, concert 4:id 5:singer_id 6:venue 7:year

DatabaseInstance concert_db() {
    DatabaseInstance db;
    db.schema_id = "concerts";
    db.rows = {
        // singer rows: id, name, city are chosen so group-by results are hand-checkable
        {{Value{1.0}, Value{"alice"}, Value{30.0}, Value{"london"}},
         {Value{2.0}, Value{"bob"}, Value{25.0}, Value{"paris"}},
         {Value{3.0}, Value{"carol"}, Value{30.0}, Value{"london"}},
         {Value{4.0}, Value{"dave"}, Value{41.0}, Value{"tokyo"}},
         {Value{5.0}, Value{"erin"}, Value{25.0}, Value{"london"}}},
        // concert rows: id, singer_id, venue, year
        {{Value{10.0}, Value{1.0}, Value{"arena"}, Value{2020.0}},
         {Value{11.0}, Value{1.0}, Value{"hall"}, Value{2021.0}},
         {Value{12.0}, Value{3.0}, Value{"arena"}, Value{2020.0}}},
    };
    db.validate(concert_schema());
    return db;
}

SchemaDef tiny_schema() {
    SchemaDef s;
    s.id = "tiny";
    s.tables = {{"t", {{"a", ColType::number}, {"b", ColType::text}, {"c", ColType::text}}}};
    s.validate();
    return s;
}

SqlAst count_star_ast(std::size_t table = 0) {
    SqlAst ast;
    ast.select = {AggExpr{AggFn::count, true, 0}};
    ast.from_table = table;
    return ast;
}

}  // namespace

TEST_CASE("smallest query serializes to the published fixed sequence") {
    SchemaDef s = tiny_schema();
    SqlAst ast = count_star_ast();
    ActionSequence seq = ast_to_actions(ast, s);
    ActionSequence expect = {
        apply_rule(rule_query),      select_table(0),
        apply_rule(rule_join_none),  apply_rule(rule_sel_agg_1),
        apply_rule(rule_agg_count_star), apply_rule(rule_where_none),
        apply_rule(rule_group_none), apply_rule(rule_order_none),
    };
    CHECK(seq == expect);

    // determinism: structurally equal ASTs serialize identically
    SqlAst twin = count_star_ast();
    CHECK(ast_to_actions(twin, s) == seq);
}

TEST_CASE("action round trip on random ASTs") {
    SchemaDef s = concert_schema();
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        SqlAst ast = random_walk_ast(s, rng);
        validate_ast(ast, s);
        ActionSequence seq = ast_to_actions(ast, s);
        SqlAst back = actions_to_ast(seq, s);
        CHECK(back == ast);
    }
}

TEST_CASE("actions_to_ast rejects truncated and malformed sequences") {
    SchemaDef s = concert_schema();
    ActionSequence seq = ast_to_actions(count_star_ast(), s);

    ActionSequence truncated(seq.begin(), seq.end() - 1);
    try {
        actions_to_ast(truncated, s);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.pos == truncated.size());
    }

    ActionSequence bad = seq;
    bad[1] = select_column(99);  // out of schema range
    try {
        actions_to_ast(bad, s);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.pos == 1);
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("admissible actions at the grammar root and after completion") {
    SchemaDef s = concert_schema();
    auto root = admissible_actions({}, s);
    REQUIRE(root.size() == 1);
    CHECK(root[0] == apply_rule(rule_query));

    ActionSequence full = ast_to_actions(count_star_ast(), s);
    CHECK(admissible_actions(full, s).empty());
}

TEST_CASE("sum column slot admits exactly the number columns (brute-force oracle)") {
    SchemaDef s = tiny_schema();
    ActionSequence prefix = {apply_rule(rule_query), select_table(0), apply_rule(rule_join_none),
                             apply_rule(rule_sel_agg_1), apply_rule(rule_agg_sum)};
    auto got = admissible_actions(prefix, s);

    // oracle: a column is admissible iff the hand-built minimal completion validates
    std::set<std::size_t> expect;
    for (std::size_t c = 0; c < s.num_columns(); ++c) {
        SqlAst candidate;
        candidate.select = {AggExpr{AggFn::sum, false, c}};
        candidate.from_table = 0;
        try {
            validate_ast(candidate, s);
            expect.insert(c);
        } catch (const data_error&) {
        }
    }
    std::set<std::size_t> got_set;
    for (const auto& a : got) {
        REQUIRE(a.kind == Action::Kind::select_column);
        got_set.insert(a.index);
    }
    CHECK(got_set == expect);
    CHECK(expect == std::set<std::size_t>{0});  // only t.a is a number
}

TEST_CASE("random admissible walks always complete to valid ASTs") {
    SchemaDef s = concert_schema();
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        SqlAst ast = random_walk_ast(s, rng);  // throws internally on dead ends
        validate_ast(ast, s);
    }
}

TEST_CASE("canonicalize sorts conjuncts, normalizes join orientation, idempotent") {
    SchemaDef s = concert_schema();

    SqlAst a;
    a.select = {AggExpr{AggFn::none, false, 1}};
    a.from_table = 0;
    a.where = {WherePred{0, CmpOp::eq, Value{1.0}}, WherePred{2, CmpOp::gt, Value{5.0}}};
    SqlAst b = a;
    std::swap(b.where[0], b.where[1]);
    CHECK(canonicalize(a, s) == canonicalize(b, s));
    CHECK(canonicalize(canonicalize(a, s), s) == canonicalize(a, s));

    SqlAst j;
    j.select = {AggExpr{AggFn::count, true, 0}};
    j.from_table = 0;
    j.join = JoinClause{1, 0, 5};  // singer.id = concert.singer_id
    SqlAst j2 = j;
    std::swap(j2.join->left_col, j2.join->right_col);  // concert.singer_id = singer.id
    CHECK(canonicalize(j, s) == canonicalize(j2, s));
}

TEST_CASE("executor count fixtures") {
    SchemaDef s = concert_schema();
    DatabaseInstance db = concert_db();

    SqlAst count_concert = count_star_ast(1);
    ResultTable r = execute(count_concert, db, s);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == ResultRow{Value{3.0}});

    // empty filter still yields a count row of 0
    SqlAst empty = count_star_ast(0);
    empty.where = {WherePred{2, CmpOp::gt, Value{100.0}}};
    ResultTable re = execute(empty, db, s);
    REQUIRE(re.size() == 1);
    CHECK(re[0] == ResultRow{Value{0.0}});
}

TEST_CASE("executor group-by matches hand evaluation of the 5-row fixture") {
    SchemaDef s = concert_schema();
    DatabaseInstance db = concert_db();

    // SELECT city, count(*) FROM singer GROUP BY city
    SqlAst ast;
    ast.select = {AggExpr{AggFn::none, false, 3}, AggExpr{AggFn::count, true, 0}};
    ast.from_table = 0;
    ast.group_by = 3;
    ResultTable r = execute(ast, db, s);
    // hand evaluation: london 3 (alice, carol, erin), paris 1, tokyo 1; sorted lexicographically
    ResultTable expect = {
        {Value{"london"}, Value{3.0}},
        {Value{"paris"}, Value{1.0}},
        {Value{"tokyo"}, Value{1.0}},
    };
    CHECK(r == expect);

    // SELECT city, avg(age) FROM singer GROUP BY city
    SqlAst avg_ast;
    avg_ast.select = {AggExpr{AggFn::none, false, 3}, AggExpr{AggFn::avg, false, 2}};
    avg_ast.from_table = 0;
    avg_ast.group_by = 3;
    ResultTable ra = execute(avg_ast, db, s);
    ResultTable expect_avg = {
        {Value{"london"}, Value{(30.0 + 30.0 + 25.0) / 3.0}},
        {Value{"paris"}, Value{25.0}},
        {Value{"tokyo"}, Value{41.0}},
    };
    CHECK(ra == expect_avg);
}

TEST_CASE("executor join fixture") {
    SchemaDef s = concert_schema();
    DatabaseInstance db = concert_db();

    // SELECT name, venue FROM singer JOIN concert ON id = singer_id ... projected pairs
    SqlAst ast;
    ast.select = {AggExpr{AggFn::none, false, 1}, AggExpr{AggFn::none, false, 6}};
    ast.from_table = 0;
    ast.join = JoinClause{1, 0, 5};
    ResultTable r = execute(ast, db, s);
    ResultTable expect = {
        {Value{"alice"}, Value{"arena"}},
        {Value{"alice"}, Value{"hall"}},
        {Value{"carol"}, Value{"arena"}},
    };
    CHECK(r == expect);
}

TEST_CASE("executor order by and limit") {
    SchemaDef s = concert_schema();
    DatabaseInstance db = concert_db();

    // SELECT name FROM singer ORDER BY age DESC LIMIT 2 -> dave (41), then alice/carol (30)
    SqlAst ast;
    ast.select = {AggExpr{AggFn::none, false, 1}};
    ast.from_table = 0;
    ast.order_by = OrderClause{AggExpr{AggFn::none, false, 2}, SortDir::desc, 2};
    ResultTable r = execute(ast, db, s);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == ResultRow{Value{"dave"}});
    CHECK(r[1] == ResultRow{Value{"alice"}});  // tie at 30 broken by row order (alice < carol)

    // ORDER BY count(*) over groups
    SqlAst g;
    g.select = {AggExpr{AggFn::none, false, 3}, AggExpr{AggFn::count, true, 0}};
    g.from_table = 0;
    g.group_by = 3;
    g.order_by = OrderClause{AggExpr{AggFn::count, true, 0}, SortDir::desc, std::nullopt};
    ResultTable rg = execute(g, db, s);
    REQUIRE(rg.size() == 3);
    CHECK(rg[0] == ResultRow{Value{"london"}, Value{3.0}});
}

TEST_CASE("executor of a query against itself is always equal (EX identity)") {
    SchemaDef s = concert_schema();
    DatabaseInstance db = concert_db();
    Rng rng(1234);
    for (int i = 0; i < 200; ++i) {
        SqlAst ast = random_walk_ast(s, rng);
        CHECK(results_equal(execute(ast, db, s), execute(ast, db, s)));
    }
}

TEST_CASE("distinct ASTs may agree on results (EM-wrong EX-right pair)") {
    SchemaDef s = concert_schema();
    DatabaseInstance db = concert_db();
    SqlAst a = count_star_ast(0);
    SqlAst b;
    b.select = {AggExpr{AggFn::count, false, 1}};  // count(name), no NULLs so equal
    b.from_table = 0;
    CHECK(!(canonicalize(a, s) == canonicalize(b, s)));
    CHECK(results_equal(execute(a, db, s), execute(b, db, s)));
}

TEST_CASE("render fixtures") {
    SchemaDef s = tiny_schema();
    CHECK(render_sql(count_star_ast(), s) == "SELECT count(*) FROM t");

    SchemaDef cs = concert_schema();
    SqlAst j;
    j.select = {AggExpr{AggFn::none, false, 3}, AggExpr{AggFn::count, true, 0}};
    j.from_table = 0;
    j.join = JoinClause{1, 0, 5};
    j.group_by = 3;
    CHECK(render_sql(j, cs) ==
          "SELECT singer.city, count(*) FROM singer JOIN concert ON singer.id = concert.singer_id "
          "GROUP BY singer.city");
}

TEST_CASE("parse/render round trip over random ASTs") {
    SchemaDef s = concert_schema();
    Rng rng(55);
    for (int i = 0; i < 2000; ++i) {
        SqlAst ast = random_walk_ast(s, rng);
        const std::string text = render_sql(ast, s);
        SqlAst back = parse_sql(text, s);
        CHECK(back == ast);
    }
}

TEST_CASE("parse rejects out-of-grammar text with positions and type violations") {
    SchemaDef s = concert_schema();
    CHECK_THROWS_AS(parse_sql("SELECT FROM singer", s), parse_error);
    CHECK_THROWS_AS(parse_sql("DELETE FROM singer", s), parse_error);
    CHECK_THROWS_AS(parse_sql("SELECT name FROM singer WHERE", s), parse_error);
    // sum over a text column parses but fails validation
    CHECK_THROWS_AS(parse_sql("SELECT sum(name) FROM singer", s), data_error);
    // join ON written in either orientation parses to the same canonical ast
    SqlAst a = parse_sql("SELECT count(*) FROM singer JOIN concert ON singer.id = concert.singer_id", s);
    SqlAst b = parse_sql("SELECT count(*) FROM singer JOIN concert ON concert.singer_id = singer.id", s);
    CHECK(canonicalize(a, s) == canonicalize(b, s));
}

TEST_CASE("difficulty component counts") {
    SchemaDef s = concert_schema();

    SqlAst easy;
    easy.select = {AggExpr{AggFn::none, false, 1}};
    easy.from_table = 0;
    CHECK(difficulty(easy) == Difficulty::easy);  // c = 0

    // join + 2 where + group_by -> c = 4 (hard); select must aggregate to stay valid with group
    SqlAst hard;
    hard.select = {AggExpr{AggFn::none, false, 3}};
    hard.from_table = 0;
    hard.join = JoinClause{1, 0, 5};
    hard.where = {WherePred{2, CmpOp::gt, Value{20.0}}, WherePred{6, CmpOp::eq, Value{"arena"}}};
    hard.group_by = 3;
    validate_ast(hard, s);
    CHECK(difficulty(hard) == Difficulty::hard);

    // 2 aggs + join + 2 where + group + order-by-agg -> c = 1+2+1+2+1+1+... >= 6 (extra)
    SqlAst extra;
    extra.select = {AggExpr{AggFn::count, true, 0}, AggExpr{AggFn::avg, false, 2}};
    extra.from_table = 0;
    extra.join = JoinClause{1, 0, 5};
    extra.where = {WherePred{2, CmpOp::gt, Value{20.0}}, WherePred{6, CmpOp::eq, Value{"arena"}}};
    extra.group_by = 3;
    extra.order_by = OrderClause{AggExpr{AggFn::count, true, 0}, SortDir::desc, 3};
    validate_ast(extra, s);
    CHECK(difficulty(extra) == Difficulty::extra);
}

TEST_CASE("schema validation rejects structural violations") {
    SchemaDef s = concert_schema();
    SchemaDef dup = s;
    dup.tables.push_back(dup.tables[0]);
    CHECK_THROWS_AS(dup.validate(), data_error);

    SchemaDef bad_fk = s;
    bad_fk.foreign_keys = {{"concert", "venue", "singer", "id"}};  // text -> number
    CHECK_THROWS_AS(bad_fk.validate(), data_error);
}
