#pragma once

#include "rain/common.hpp"

#include <Eigen/Core>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace rain {

struct SchemaField {
    std::string name;
    ColumnKind kind = ColumnKind::Real;
    bool operator==(const SchemaField&) const = default;
};

struct Row {
    std::int64_t id = 0;
    std::vector<Value> values; // aligned to schema
};

/// A queried relation. `id_column` names the schema column holding row ids;
/// ids are unique within the relation.
struct Relation {
    std::string name;
    std::vector<SchemaField> schema;
    std::vector<Row> rows;
    std::string id_column;

    int column_index(const std::string& attr) const; // -1 if absent
    /// Names of the numeric (integer/real) columns excluding the id column,
    /// in schema order. These are the model features of the relation.
    std::vector<std::string> feature_columns() const;
};

struct TrainingRecord {
    std::int64_t id = 0;
    Eigen::VectorXd features;
    int label = 0;
};

struct TrainingSet {
    std::vector<TrainingRecord> records;
    int dim = 0;
    int classes = 2;

    std::size_t size() const { return records.size(); }
    TrainingSet without(const std::set<std::int64_t>& ids) const;
};

/// Label corruption: flip `rate` of the records matching the predicate
/// (conjunction of feature-range tests and an optional label equality)
/// to `flip_to`, sampled without replacement with `seed`.
struct CorruptionSpec {
    struct FeatureRange {
        int feature = 0;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
    };
    std::vector<FeatureRange> ranges;
    std::optional<int> label_equals;
    int flip_to = 0;
    double rate = 0.0;
    std::uint64_t seed = 0;

    bool matches(const TrainingRecord& r) const;
};

Relation load_relation_csv(const std::string& path, const std::string& name,
                           const std::vector<SchemaField>& schema,
                           const std::string& id_column);

/// Training CSV: id column, optional-to-say label column, every other column
/// a real feature. `classes` <= 0 infers C as max(label)+1 (at least 2).
TrainingSet load_training_csv(const std::string& path, const std::string& id_column,
                              const std::string& label_column, int classes = 0);

std::pair<TrainingSet, std::set<std::int64_t>> inject_corruption(const TrainingSet& ts,
                                                                 const CorruptionSpec& spec);

} // namespace rain
