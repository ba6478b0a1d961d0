#include "rain/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace rain {

int Relation::column_index(const std::string& attr) const {
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == attr) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> Relation::feature_columns() const {
    std::vector<std::string> out;
    for (const auto& f : schema) {
        if (f.name == id_column) continue;
        if (f.kind == ColumnKind::Integer || f.kind == ColumnKind::Real) out.push_back(f.name);
    }
    return out;
}

TrainingSet TrainingSet::without(const std::set<std::int64_t>& ids) const {
    TrainingSet out;
    out.dim = dim;
    out.classes = classes;
    out.records.reserve(records.size());
    for (const auto& r : records)
        if (!ids.count(r.id)) out.records.push_back(r);
    return out;
}

bool CorruptionSpec::matches(const TrainingRecord& r) const {
    if (label_equals && r.label != *label_equals) return false;
    for (const auto& rng : ranges) {
        if (rng.feature < 0 || rng.feature >= r.features.size()) return false;
        double v = r.features[rng.feature];
        if (v < rng.lo || v > rng.hi) return false;
    }
    return true;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

Value parse_cell(const std::string& cell, ColumnKind kind, const std::string& path, int line_no) {
    auto fail = [&](const char* what) -> Value {
        throw DataError(path + ":" + std::to_string(line_no) + ": cannot parse '" + cell +
                        "' as " + what);
    };
    switch (kind) {
    case ColumnKind::Integer: {
        std::size_t used = 0;
        try {
            std::int64_t v = std::stoll(cell, &used);
            if (used != cell.size()) return fail("integer");
            return v;
        } catch (const std::exception&) {
            return fail("integer");
        }
    }
    case ColumnKind::Real: {
        std::size_t used = 0;
        try {
            double v = std::stod(cell, &used);
            if (used != cell.size()) return fail("real");
            return v;
        } catch (const std::exception&) {
            return fail("real");
        }
    }
    case ColumnKind::Boolean:
        if (cell == "true" || cell == "1") return true;
        if (cell == "false" || cell == "0") return false;
        return fail("boolean");
    case ColumnKind::Text:
        return cell;
    }
    return fail("value");
}

std::vector<std::string> read_header(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, header row required");
    return split_line(line);
}

} // namespace

Relation load_relation_csv(const std::string& path, const std::string& name,
                           const std::vector<SchemaField>& schema,
                           const std::string& id_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    auto header = read_header(in, path);
    if (header.size() != schema.size())
        throw DataError(path + ": header has " + std::to_string(header.size()) +
                        " columns, schema expects " + std::to_string(schema.size()));
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (header[i] != schema[i].name)
            throw DataError(path + ": header column '" + header[i] + "' does not match schema '" +
                            schema[i].name + "'");
    int id_idx = -1;
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == id_column) id_idx = static_cast<int>(i);
    if (id_idx < 0) throw DataError(path + ": id column '" + id_column + "' not in schema");
    if (schema[id_idx].kind != ColumnKind::Integer)
        throw DataError(path + ": id column must be integer");

    Relation rel;
    rel.name = name;
    rel.schema = schema;
    rel.id_column = id_column;
    std::unordered_set<std::int64_t> seen;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != schema.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(schema.size()) + " cells, got " +
                            std::to_string(cells.size()));
        Row row;
        row.values.reserve(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            row.values.push_back(parse_cell(cells[i], schema[i].kind, path, line_no));
        row.id = std::get<std::int64_t>(row.values[id_idx]);
        if (!seen.insert(row.id).second)
            throw DataError(path + ":" + std::to_string(line_no) + ": duplicate row id " +
                            std::to_string(row.id));
        rel.rows.push_back(std::move(row));
    }
    return rel;
}

TrainingSet load_training_csv(const std::string& path, const std::string& id_column,
                              const std::string& label_column, int classes) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    auto header = read_header(in, path);
    int id_idx = -1, label_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == id_column) id_idx = static_cast<int>(i);
        if (header[i] == label_column) label_idx = static_cast<int>(i);
    }
    if (id_idx < 0) throw DataError(path + ": id column '" + id_column + "' not in header");
    if (label_idx < 0) throw DataError(path + ": label column '" + label_column + "' not in header");

    TrainingSet ts;
    ts.dim = static_cast<int>(header.size()) - 2;
    if (ts.dim < 1) throw DataError(path + ": no feature columns");
    std::unordered_set<std::int64_t> seen;
    std::string line;
    int line_no = 1;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        TrainingRecord rec;
        rec.features.resize(ts.dim);
        int fi = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (static_cast<int>(i) == id_idx) {
                rec.id = std::get<std::int64_t>(parse_cell(cells[i], ColumnKind::Integer, path, line_no));
            } else if (static_cast<int>(i) == label_idx) {
                rec.label = static_cast<int>(
                    std::get<std::int64_t>(parse_cell(cells[i], ColumnKind::Integer, path, line_no)));
            } else {
                rec.features[fi++] = std::get<double>(parse_cell(cells[i], ColumnKind::Real, path, line_no));
            }
        }
        if (!seen.insert(rec.id).second)
            throw DataError(path + ":" + std::to_string(line_no) + ": duplicate record id " +
                            std::to_string(rec.id));
        max_label = std::max(max_label, rec.label);
        if (rec.label < 0)
            throw DataError(path + ":" + std::to_string(line_no) + ": negative label");
        ts.records.push_back(std::move(rec));
    }
    ts.classes = classes > 0 ? classes : std::max(2, max_label + 1);
    for (const auto& r : ts.records)
        if (r.label >= ts.classes)
            throw DataError(path + ": label " + std::to_string(r.label) + " out of range for C=" +
                            std::to_string(ts.classes));
    return ts;
}

std::pair<TrainingSet, std::set<std::int64_t>> inject_corruption(const TrainingSet& ts,
                                                                 const CorruptionSpec& spec) {
    if (spec.flip_to < 0 || spec.flip_to >= ts.classes)
        throw DataError("flip_to label out of range");
    if (spec.rate < 0.0 || spec.rate > 1.0) throw DataError("rate must be in [0,1]");

    std::vector<std::size_t> matches;
    for (std::size_t i = 0; i < ts.records.size(); ++i)
        if (spec.matches(ts.records[i])) matches.push_back(i);

    // round-half-up
    auto n_flip = static_cast<std::size_t>(std::floor(spec.rate * matches.size() + 0.5));
    std::mt19937_64 rng(spec.seed);
    // partial Fisher-Yates: first n_flip entries are the sample
    for (std::size_t i = 0; i < n_flip; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, matches.size() - 1);
        std::swap(matches[i], matches[pick(rng)]);
    }

    TrainingSet out = ts;
    std::set<std::int64_t> corrupted;
    for (std::size_t i = 0; i < n_flip; ++i) {
        out.records[matches[i]].label = spec.flip_to;
        corrupted.insert(out.records[matches[i]].id);
    }
    return {std::move(out), std::move(corrupted)};
}

} // namespace rain
