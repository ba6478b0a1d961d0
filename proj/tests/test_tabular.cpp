#include "rain/tabular.hpp"

#include <doctest.h>
#include <fstream>

using namespace rain;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = "/tmp/rain_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("training csv loads in file order") {
    auto path = write_temp("train.csv", "id,x0,x1,y\n0,1.5,2.0,1\n1,-0.5,0.25,0\n7,3,4,1\n");
    TrainingSet ts = load_training_csv(path, "id", "y");
    CHECK(ts.size() == 3);
    CHECK(ts.dim == 2);
    CHECK(ts.classes == 2);
    CHECK(ts.records[0].id == 0);
    CHECK(ts.records[2].id == 7);
    CHECK(ts.records[0].features[1] == doctest::Approx(2.0));
    CHECK(ts.records[1].label == 0);
}

TEST_CASE("relation csv validates its header against the schema") {
    std::vector<SchemaField> schema{{"id", ColumnKind::Integer}, {"x0", ColumnKind::Real}};
    auto path = write_temp("rel.csv", "id,x1\n0,1.0\n");
    CHECK_THROWS_AS(load_relation_csv(path, "r", schema, "id"), DataError);

    auto ok = write_temp("rel_ok.csv", "id,x0\n3,1.5\n");
    Relation rel = load_relation_csv(ok, "r", schema, "id");
    CHECK(rel.rows.size() == 1);
    CHECK(rel.rows[0].id == 3);
    CHECK(rel.feature_columns() == std::vector<std::string>{"x0"});
}

TEST_CASE("empty data section is a valid zero-row relation") {
    std::vector<SchemaField> schema{{"id", ColumnKind::Integer}, {"x0", ColumnKind::Real}};
    auto path = write_temp("empty.csv", "id,x0\n");
    Relation rel = load_relation_csv(path, "r", schema, "id");
    CHECK(rel.rows.empty());
}

TEST_CASE("unparseable cells report the line number") {
    std::vector<SchemaField> schema{{"id", ColumnKind::Integer}, {"x0", ColumnKind::Real}};
    auto path = write_temp("bad.csv", "id,x0\n0,1.0\n1,zzz\n");
    try {
        load_relation_csv(path, "r", schema, "id");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

namespace {

TrainingSet small_set() {
    TrainingSet ts;
    ts.dim = 1;
    ts.classes = 8;
    for (int i = 0; i < 10; ++i) {
        TrainingRecord r;
        r.id = i;
        r.features = Eigen::VectorXd::Constant(1, static_cast<double>(i));
        r.label = i % 2;
        ts.records.push_back(std::move(r));
    }
    return ts;
}

} // namespace

TEST_CASE("zero corruption rate changes nothing") {
    TrainingSet ts = small_set();
    CorruptionSpec spec;
    spec.rate = 0.0;
    spec.flip_to = 7;
    auto [out, ids] = inject_corruption(ts, spec);
    CHECK(ids.empty());
    for (std::size_t i = 0; i < ts.size(); ++i) CHECK(out.records[i].label == ts.records[i].label);
}

TEST_CASE("full-rate corruption flips every matching label") {
    TrainingSet ts = small_set();
    CorruptionSpec spec;
    spec.rate = 1.0;
    spec.label_equals = 1;
    spec.flip_to = 7;
    auto [out, ids] = inject_corruption(ts, spec);
    CHECK(ids.size() == 5);
    for (const auto& r : out.records) {
        if (ids.count(r.id)) CHECK(r.label == 7);
        else CHECK(r.label == 0);
    }
}

TEST_CASE("corruption is deterministic per seed and touches labels only") {
    TrainingSet ts = small_set();
    CorruptionSpec spec;
    spec.rate = 0.5;
    spec.seed = 42;
    spec.flip_to = 3;
    auto [out1, ids1] = inject_corruption(ts, spec);
    auto [out2, ids2] = inject_corruption(ts, spec);
    CHECK(ids1 == ids2);
    CHECK(ids1.size() == 5); // round(0.5 * 10)
    for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(out1.records[i].id == ts.records[i].id);
        CHECK(out1.records[i].features == ts.records[i].features);
        CHECK(out1.records[i].label == out2.records[i].label);
    }
    spec.seed = 43;
    auto [out3, ids3] = inject_corruption(ts, spec);
    CHECK(ids3.size() == 5);
}

TEST_CASE("corruption count rounds half up") {
    TrainingSet ts = small_set(); // 5 records with label 1
    CorruptionSpec spec;
    spec.label_equals = 1;
    spec.rate = 0.5; // 2.5 matches -> 3
    spec.flip_to = 0;
    auto [out, ids] = inject_corruption(ts, spec);
    CHECK(ids.size() == 3);
}

TEST_CASE("feature-range predicates select the matching records") {
    TrainingSet ts = small_set();
    CorruptionSpec spec;
    spec.rate = 1.0;
    spec.flip_to = 7;
    spec.ranges.push_back({0, 6.0, 9.0}); // features 6..9
    auto [out, ids] = inject_corruption(ts, spec);
    CHECK(ids == std::set<std::int64_t>{6, 7, 8, 9});
}
