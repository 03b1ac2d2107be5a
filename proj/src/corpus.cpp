#include "sun/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "sun/error.hpp"
#include "sun/rng.hpp"
#include "sun/sql_text.hpp"

namespace sun {

using nlohmann::json;

const SchemaDef& Corpus::schema_by_id(const std::string& id) const {
    for (const auto& s : schemas) {
        if (s.id == id) return s;
    }
    throw data_error("unknown schema '" + id + "'");
}

const DatabaseInstance& Corpus::database_by_id(const std::string& schema_id) const {
    for (const auto& db : databases) {
        if (db.schema_id == schema_id) return db;
    }
    throw data_error("no database for schema '" + schema_id + "'");
}

std::vector<const ExampleRecord*> Corpus::split_examples(const std::string& split) const {
    std::vector<const ExampleRecord*> out;
    for (const auto& e : examples) {
        if (e.split == split) out.push_back(&e);
    }
    return out;
}

void Corpus::validate() const {
    std::set<std::string> schema_ids;
    for (const auto& s : schemas) {
        s.validate();
        if (!schema_ids.insert(s.id).second) throw data_error("duplicate schema id '" + s.id + "'");
    }
    std::set<std::string> db_ids;
    for (const auto& db : databases) {
        if (!db_ids.insert(db.schema_id).second) {
            throw data_error("duplicate database for schema '" + db.schema_id + "'");
        }
        db.validate(schema_by_id(db.schema_id));
    }

    std::set<std::string> ids;
    std::map<std::string, std::vector<const ExampleRecord*>> groups;
    for (const auto& e : examples) {
        if (!ids.insert(e.id).second) throw data_error("duplicate example id '" + e.id + "'");
        if (e.split != "train" && e.split != "dev" && e.split != "test") {
            throw data_error("example '" + e.id + "' has unknown split '" + e.split + "'");
        }
        if (e.question.empty()) throw data_error("example '" + e.id + "' has an empty question");
        for (const auto& tok : e.question) {
            if (tok.empty()) throw data_error("example '" + e.id + "' has an empty token");
        }
        const SchemaDef& schema = schema_by_id(e.schema_id);  // names schema_id when missing
        database_by_id(e.schema_id);
        const SqlAst parsed = parse_sql(e.sql_text, schema);
        if (!(parsed == e.gold_ast)) {
            throw data_error("example '" + e.id + "' gold AST does not match its sql text");
        }
        groups[e.group_id].push_back(&e);
    }

    for (const auto& [gid, members] : groups) {
        const SchemaDef& schema = schema_by_id(members[0]->schema_id);
        const SqlAst canon = canonicalize(members[0]->gold_ast, schema);
        bool any_train = false, any_heldout = false;
        for (const auto* m : members) {
            if (m->schema_id != members[0]->schema_id) {
                throw data_error("group '" + gid + "' spans multiple schemas");
            }
            if (!(canonicalize(m->gold_ast, schema) == canon)) {
                throw data_error("group '" + gid + "' members disagree on the canonical AST");
            }
            (m->split == "train" ? any_train : any_heldout) = true;
        }
        if (members.size() >= 2 && any_heldout && !any_train) {
            throw data_error("group '" + gid + "' is held out entirely; no train sibling");
        }
    }
}

namespace {

json value_to_json(const Value& v) {
    if (is_number(v)) {
        const double d = std::get<double>(v);
        if (d == std::floor(d) && std::abs(d) < 1e15) return json(static_cast<std::int64_t>(d));
        return json(d);
    }
    return json(std::get<std::string>(v));
}

Value value_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return Value{j.get<double>()};
    if (j.is_string()) return Value{j.get<std::string>()};
    throw data_error("unsupported cell value in " + where);
}

void require_keys(const json& obj, const std::set<std::string>& keys, const std::string& where) {
    for (const auto& k : keys) {
        if (!obj.contains(k)) throw data_error("missing key '" + k + "' in " + where);
    }
    for (const auto& [k, v] : obj.items()) {
        if (!keys.count(k)) throw data_error("unexpected key '" + k + "' in " + where);
    }
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
    json root;
    root["version"] = 1;

    auto schemas = json::array();
    for (const auto& s : corpus.schemas) {
        json js;
        js["id"] = s.id;
        auto tables = json::array();
        for (const auto& t : s.tables) {
            json jt;
            jt["name"] = t.name;
            auto cols = json::array();
            for (const auto& c : t.columns) {
                cols.push_back({{"name", c.name},
                                {"type", c.type == ColType::number ? "number" : "text"}});
            }
            jt["columns"] = cols;
            tables.push_back(jt);
        }
        js["tables"] = tables;
        auto fks = json::array();
        for (const auto& fk : s.foreign_keys) {
            fks.push_back({{"table", fk.table},
                           {"column", fk.column},
                           {"ref_table", fk.ref_table},
                           {"ref_column", fk.ref_column}});
        }
        js["foreign_keys"] = fks;
        schemas.push_back(js);
    }
    root["schemas"] = schemas;

    auto databases = json::array();
    for (const auto& db : corpus.databases) {
        const SchemaDef& schema = corpus.schema_by_id(db.schema_id);
        json jdb;
        jdb["schema_id"] = db.schema_id;
        json tables = json::object();
        for (std::size_t t = 0; t < schema.tables.size(); ++t) {
            json jt;
            auto cols = json::array();
            for (const auto& c : schema.tables[t].columns) cols.push_back(c.name);
            jt["columns"] = cols;
            auto rows = json::array();
            for (const auto& row : db.rows[t]) {
                auto jrow = json::array();
                for (const auto& cell : row) jrow.push_back(value_to_json(cell));
                rows.push_back(jrow);
            }
            jt["rows"] = rows;
            tables[schema.tables[t].name] = jt;
        }
        jdb["tables"] = tables;
        databases.push_back(jdb);
    }
    root["databases"] = databases;

    auto examples = json::array();
    for (const auto& e : corpus.examples) {
        json je;
        je["id"] = e.id;
        je["schema_id"] = e.schema_id;
        je["split"] = e.split;
        je["group_id"] = e.group_id;
        je["question"] = e.question;
        je["sql"] = e.sql_text;
        examples.push_back(je);
    }
    root["examples"] = examples;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot open corpus file for writing: " + path);
    out << root.dump(1) << "\n";
    if (!out) throw data_error("failed writing corpus file: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open corpus file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw data_error("malformed corpus JSON in " + path + ": " + e.what());
    }
    require_keys(root, {"version", "schemas", "databases", "examples"}, "corpus root");
    if (root["version"].get<int>() != 1) throw data_error("unsupported corpus version");

    Corpus corpus;
    for (const auto& js : root["schemas"]) {
        require_keys(js, {"id", "tables", "foreign_keys"}, "schema");
        SchemaDef s;
        s.id = js["id"].get<std::string>();
        for (const auto& jt : js["tables"]) {
            require_keys(jt, {"name", "columns"}, "table of schema '" + s.id + "'");
            TableDef t;
            t.name = jt["name"].get<std::string>();
            for (const auto& jc : jt["columns"]) {
                require_keys(jc, {"name", "type"}, "column of table '" + t.name + "'");
                const std::string ty = jc["type"].get<std::string>();
                if (ty != "number" && ty != "text") {
                    throw data_error("unknown column type '" + ty + "' in schema '" + s.id + "'");
                }
                t.columns.push_back(
                    {jc["name"].get<std::string>(), ty == "number" ? ColType::number : ColType::text});
            }
            s.tables.push_back(std::move(t));
        }
        for (const auto& jf : js["foreign_keys"]) {
            require_keys(jf, {"table", "column", "ref_table", "ref_column"},
                         "foreign key of schema '" + s.id + "'");
            s.foreign_keys.push_back({jf["table"].get<std::string>(), jf["column"].get<std::string>(),
                                      jf["ref_table"].get<std::string>(),
                                      jf["ref_column"].get<std::string>()});
        }
        corpus.schemas.push_back(std::move(s));
    }

    for (const auto& jdb : root["databases"]) {
        require_keys(jdb, {"schema_id", "tables"}, "database");
        DatabaseInstance db;
        db.schema_id = jdb["schema_id"].get<std::string>();
        const SchemaDef& schema = corpus.schema_by_id(db.schema_id);
        db.rows.resize(schema.tables.size());
        for (const auto& [tname, jt] : jdb["tables"].items()) {
            require_keys(jt, {"columns", "rows"}, "database table '" + tname + "'");
            const std::size_t t = schema.table_index(tname);
            const auto& cols = schema.tables[t].columns;
            if (jt["columns"].size() != cols.size()) {
                throw data_error("database table '" + tname + "' column list disagrees with schema");
            }
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (jt["columns"][c].get<std::string>() != cols[c].name) {
                    throw data_error("database table '" + tname + "' column order disagrees with schema");
                }
            }
            for (const auto& jrow : jt["rows"]) {
                std::vector<Value> row;
                for (const auto& cell : jrow) row.push_back(value_from_json(cell, "table '" + tname + "'"));
                db.rows[t].push_back(std::move(row));
            }
        }
        corpus.databases.push_back(std::move(db));
    }

    for (const auto& je : root["examples"]) {
        require_keys(je, {"id", "schema_id", "split", "group_id", "question", "sql"}, "example");
        ExampleRecord e;
        e.id = je["id"].get<std::string>();
        e.schema_id = je["schema_id"].get<std::string>();
        e.split = je["split"].get<std::string>();
        e.group_id = je["group_id"].get<std::string>();
        for (const auto& tok : je["question"]) e.question.push_back(tok.get<std::string>());
        e.sql_text = je["sql"].get<std::string>();
        const SchemaDef& schema = corpus.schema_by_id(e.schema_id);
        try {
            e.gold_ast = parse_sql(e.sql_text, schema);
        } catch (const data_error& err) {
            throw data_error("example '" + e.id + "': " + err.what());
        }
        corpus.examples.push_back(std::move(e));
    }

    corpus.validate();
    return corpus;
}

std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw config_error("batch_size must be at least 1");
    std::vector<const ExampleRecord*> train = corpus.split_examples("train");
    if (train.empty()) throw data_error("train split is empty");

    std::map<std::string, std::vector<const ExampleRecord*>> groups;
    for (const auto* e : train) groups[e->group_id].push_back(e);

    Rng rng(seed);
    rng.shuffle(train.begin(), train.end());

    std::vector<Batch> batches;
    Batch current;
    for (const auto* e : train) {
        const auto& members = groups[e->group_id];
        BatchItem item;
        item.record = e;
        if (members.size() >= 2) {
            // uniform partner among the other members
            std::size_t k = rng.bounded(members.size() - 1);
            for (const auto* m : members) {
                if (m == e) continue;
                if (k == 0) {
                    item.partner = m;
                    break;
                }
                --k;
            }
        }
        current.items.push_back(item);
        if (current.items.size() == batch_size) {
            batches.push_back(std::move(current));
            current = Batch{};
        }
    }
    if (!current.items.empty()) batches.push_back(std::move(current));
    return batches;
}

}  // namespace sun
