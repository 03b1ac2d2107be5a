#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sun/schema.hpp"
#include "sun/sql_ast.hpp"

namespace sun {

// One question/SQL unit. Records sharing a group_id are paraphrases of the
// same intent and carry identical canonical gold ASTs.
struct ExampleRecord {
    std::string id;
    std::string schema_id;
    std::string split;  // train | dev | test
    std::string group_id;
    std::vector<std::string> question;  // lowercase tokens
    std::string sql_text;
    SqlAst gold_ast;
};

struct Corpus {
    std::vector<SchemaDef> schemas;
    std::vector<DatabaseInstance> databases;
    std::vector<ExampleRecord> examples;

    const SchemaDef& schema_by_id(const std::string& id) const;
    const DatabaseInstance& database_by_id(const std::string& schema_id) const;
    std::vector<const ExampleRecord*> split_examples(const std::string& split) const;

    // Structural checks: references resolve, questions nonempty, gold ASTs
    // parse and agree per group. Throws data_error naming the offender.
    void validate() const;
};

struct GeneratorProfile {
    std::size_t num_schemas = 1;
    std::size_t groups_per_schema = 50;
    std::size_t paraphrases_min = 2;
    std::size_t paraphrases_max = 4;
    double singleton_fraction = 0.3;
    std::size_t rows_per_table = 12;
};

// Deterministic synthetic corpus: toy-grammar intents, template paraphrases,
// paraphrase-held-out dev/test splits, re-rolled row data.
Corpus generate_corpus(std::uint64_t seed, const GeneratorProfile& profile);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// A training item: a record plus its sampled same-group partner, or a record
// whose group has size 1 within the train split.
struct BatchItem {
    const ExampleRecord* record = nullptr;
    const ExampleRecord* partner = nullptr;  // null for singletons

    bool paired() const { return partner != nullptr; }
};

struct Batch {
    std::vector<BatchItem> items;
};

// Shuffles the train split and pairs each multi-paraphrase record with a
// uniformly sampled same-group partner; the epoch seed drives both.
std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed);

}  // namespace sun
