#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rain/bench.hpp"

namespace py = pybind11;
using namespace rain;

namespace {

TrainingSet training_set_from_arrays(const Eigen::MatrixXd& features,
                                     const std::vector<int>& labels, int classes) {
    if (features.rows() != static_cast<long>(labels.size()))
        throw DataError("features and labels disagree on the record count");
    TrainingSet ts;
    ts.dim = static_cast<int>(features.cols());
    int max_label = 0;
    for (long i = 0; i < features.rows(); ++i) {
        TrainingRecord r;
        r.id = i;
        r.features = features.row(i).transpose();
        r.label = labels[i];
        max_label = std::max(max_label, r.label);
        ts.records.push_back(std::move(r));
    }
    ts.classes = classes > 0 ? classes : std::max(2, max_label + 1);
    return ts;
}

Relation relation_from_array(const std::string& name, const Eigen::MatrixXd& features) {
    Relation rel;
    rel.name = name;
    rel.id_column = "id";
    rel.schema.push_back({"id", ColumnKind::Integer});
    for (long c = 0; c < features.cols(); ++c)
        rel.schema.push_back({"x" + std::to_string(c), ColumnKind::Real});
    for (long i = 0; i < features.rows(); ++i) {
        Row row;
        row.id = i;
        row.values.push_back(static_cast<std::int64_t>(i));
        for (long c = 0; c < features.cols(); ++c) row.values.push_back(features(i, c));
        rel.rows.push_back(std::move(row));
    }
    return rel;
}

// Owns relations so the Catalog's raw pointers stay valid from Python.
struct Database {
    std::vector<std::shared_ptr<Relation>> relations;

    void add(const Relation& rel) { relations.push_back(std::make_shared<Relation>(rel)); }
    Catalog catalog() const {
        Catalog db;
        for (const auto& r : relations) db[r->name] = r.get();
        return db;
    }
};

} // namespace

PYBIND11_MODULE(_rain, mod) {
    mod.doc() = "complaint-driven training data debugging for model-backed SQL";

    py::register_exception<Error>(mod, "RainError");

    py::class_<TrainingRecord>(mod, "TrainingRecord")
        .def_readonly("id", &TrainingRecord::id)
        .def_readonly("features", &TrainingRecord::features)
        .def_readonly("label", &TrainingRecord::label);

    py::class_<TrainingSet>(mod, "TrainingSet")
        .def(py::init(&training_set_from_arrays), py::arg("features"), py::arg("labels"),
             py::arg("classes") = 0)
        .def_readonly("dim", &TrainingSet::dim)
        .def_readonly("classes", &TrainingSet::classes)
        .def_readonly("records", &TrainingSet::records)
        .def("__len__", &TrainingSet::size)
        .def("without", [](const TrainingSet& ts, const std::vector<std::int64_t>& ids) {
            return ts.without(std::set<std::int64_t>(ids.begin(), ids.end()));
        });

    py::class_<Relation>(mod, "Relation")
        .def(py::init(&relation_from_array), py::arg("name"), py::arg("features"))
        .def_readonly("name", &Relation::name)
        .def("feature_columns", &Relation::feature_columns)
        .def("__len__", [](const Relation& r) { return r.rows.size(); });

    py::class_<Database>(mod, "Database")
        .def(py::init<>())
        .def("add", &Database::add);

    py::class_<CorruptionSpec>(mod, "CorruptionSpec")
        .def(py::init([](std::optional<int> label_equals, int flip_to, double rate,
                         std::uint64_t seed) {
                 CorruptionSpec s;
                 s.label_equals = label_equals;
                 s.flip_to = flip_to;
                 s.rate = rate;
                 s.seed = seed;
                 return s;
             }),
             py::arg("label_equals"), py::arg("flip_to"), py::arg("rate"), py::arg("seed") = 0)
        .def("add_feature_range", [](CorruptionSpec& s, int feature, double lo, double hi) {
            s.ranges.push_back({feature, lo, hi});
        });

    mod.def("inject_corruption", [](const TrainingSet& ts, const CorruptionSpec& spec) {
        auto [out, ids] = inject_corruption(ts, spec);
        return py::make_tuple(out, std::vector<std::int64_t>(ids.begin(), ids.end()));
    });

    py::class_<Hyper>(mod, "Hyper")
        .def(py::init<>())
        .def_readwrite("lambda_", &Hyper::lambda)
        .def_readwrite("tolerance", &Hyper::tolerance)
        .def_readwrite("max_iterations", &Hyper::max_iterations)
        .def_readwrite("fit_intercept", &Hyper::fit_intercept);

    py::class_<ModelState>(mod, "ModelState")
        .def_readonly("theta", &ModelState::theta)
        .def_readonly("d", &ModelState::d)
        .def_readonly("classes", &ModelState::classes)
        .def_readonly("converged", &ModelState::converged)
        .def_readonly("grad_norm", &ModelState::grad_norm)
        .def("to_json", &model_to_json);

    mod.def("train", &train, py::arg("ts"), py::arg("hyper") = Hyper{},
            py::arg("warm_start") = std::nullopt);
    mod.def("predict_proba", &predict_proba);
    mod.def("loss_value", &loss_value);
    mod.def("loss_grad", &loss_grad);
    mod.def("hvp", &hvp);

    py::class_<CgSettings>(mod, "CgSettings")
        .def(py::init<>())
        .def_readwrite("residual_tol", &CgSettings::residual_tol)
        .def_readwrite("max_iters", &CgSettings::max_iters)
        .def_readwrite("damping", &CgSettings::damping);

    mod.def("solve_inverse_hvp", &solve_inverse_hvp, py::arg("model"), py::arg("ts"),
            py::arg("b"), py::arg("cg") = CgSettings{});

    py::class_<InfluenceScores>(mod, "InfluenceScores")
        .def_readonly("record_ids", &InfluenceScores::record_ids)
        .def_readonly("scores", &InfluenceScores::scores)
        .def("by_id", &InfluenceScores::by_id);

    mod.def("self_influence_scores", &self_influence_scores, py::arg("model"), py::arg("ts"),
            py::arg("cg") = CgSettings{});
    mod.def("loss_scores", &loss_scores);

    py::class_<QueryPlan>(mod, "QueryPlan")
        .def("__str__", [](const QueryPlan& p) { return print_plan(p); });

    mod.def("parse_query", &parse_query);
    mod.def("print_plan", &print_plan);
    mod.def("validate_plan",
            [](const QueryPlan& plan, const Database& db, int dim, int classes) {
                return validate_plan(plan, db.catalog(), dim, classes);
            });

    py::class_<PredictionView>(mod, "PredictionView")
        .def_readonly("source", &PredictionView::source)
        .def("predicted_class",
             [](const PredictionView& v, std::int64_t row) { return v.at(row).predicted_class; })
        .def("class_probs",
             [](const PredictionView& v, std::int64_t row) { return v.at(row).class_probs; });

    mod.def("build_prediction_view",
            [](const ModelState& m, const Relation& rel) {
                return build_prediction_view(m, rel, rel.feature_columns());
            });

    py::class_<ResultSet>(mod, "ResultSet")
        .def_readonly("columns", &ResultSet::columns)
        .def("to_csv", &result_to_csv)
        .def("__len__", [](const ResultSet& r) { return r.rows.size(); })
        .def("keys", [](const ResultSet& r) {
            std::vector<std::string> keys;
            for (const auto& row : r.rows) keys.push_back(row.key);
            return keys;
        })
        .def("value", [](const ResultSet& r, const std::string& key, const std::string& column) {
            const auto* row = r.find(key);
            if (!row) throw EvalError("no output row with key '" + key + "'");
            for (std::size_t i = 0; i < r.columns.size(); ++i)
                if (r.columns[i] == column) return value_as_real(row->values[i]);
            throw EvalError("no column '" + column + "'");
        });

    py::class_<ProvenanceMap>(mod, "ProvenanceMap").def("to_json", &provenance_to_json);

    mod.def("execute", [](const QueryPlan& plan, const Database& db, const Views& views) {
        return execute(plan, db.catalog(), views);
    });
    mod.def("execute_debug", [](const QueryPlan& plan, const Database& db, const Views& views) {
        return execute_debug(plan, db.catalog(), views);
    });

    py::class_<Complaint> complaint(mod, "Complaint");
    complaint.def(py::init<>())
        .def_readwrite("query", &Complaint::query)
        .def_readwrite("attr", &Complaint::attr)
        .def_readwrite("desired", &Complaint::desired);
    mod.def("complaints_from_json", &complaints_from_json);
    mod.def("complaints_to_json", &complaints_to_json);
    mod.def("count_complaint", [](const std::string& query, double desired, const std::string& op) {
        Complaint c;
        c.kind = Complaint::Kind::Value;
        c.query = query;
        c.attr = "count";
        c.op = op == "<=" ? CmpOp::Le : op == ">=" ? CmpOp::Ge : CmpOp::Eq;
        c.desired = desired;
        return c;
    }, py::arg("query"), py::arg("desired"), py::arg("op") = "=");
    mod.def("tuple_complaint", [](const std::string& query, const std::string& tuple_key) {
        Complaint c;
        c.kind = Complaint::Kind::Tuple;
        c.query = query;
        c.target.tuple_key = tuple_key;
        return c;
    });
    mod.def("prediction_complaint",
            [](const std::string& rel, std::int64_t row_id, int desired_class) {
                Complaint c;
                c.kind = Complaint::Kind::Prediction;
                c.target.rel = rel;
                c.target.row_id = row_id;
                c.desired = desired_class;
                return c;
            });

    py::enum_<Method>(mod, "Method")
        .value("holistic", Method::Holistic)
        .value("twostep", Method::TwoStep)
        .value("loss", Method::Loss)
        .value("infloss", Method::InfLoss)
        .value("auto", Method::Auto);

    py::class_<SessionConfig>(mod, "SessionConfig")
        .def(py::init<>())
        .def_readwrite("method", &SessionConfig::method)
        .def_readwrite("k_per_iteration", &SessionConfig::k_per_iteration)
        .def_readwrite("max_removals", &SessionConfig::max_removals)
        .def_readwrite("hyper", &SessionConfig::hyper)
        .def_readwrite("cg", &SessionConfig::cg)
        .def_readwrite("seed", &SessionConfig::seed)
        .def_readwrite("warm_start", &SessionConfig::warm_start)
        .def_readwrite("exact_or", &SessionConfig::exact_or);

    py::class_<DebugReport>(mod, "DebugReport")
        .def_readonly("removed_order", &DebugReport::removed_order)
        .def_readonly("complaints_resolved", &DebugReport::complaints_resolved)
        .def("to_json", &report_to_json)
        .def("ranking_csv", &report_ranking_csv)
        .def("iterations", [](const DebugReport& r) { return r.iterations.size(); });

    mod.def("debug",
            [](const SessionConfig& cfg, const std::string& query_name, const QueryPlan& plan,
               const std::vector<Complaint>& complaints, const TrainingSet& ts,
               const Database& db) {
                return debug(cfg, {{query_name, plan}}, complaints, ts, db.catalog());
            },
            py::arg("config"), py::arg("query_name"), py::arg("plan"), py::arg("complaints"),
            py::arg("ts"), py::arg("db"));

    mod.def("recall_curve", [](const std::vector<std::int64_t>& ranked,
                               const std::vector<std::int64_t>& corrupted) {
        return recall_curve(ranked, std::set<std::int64_t>(corrupted.begin(), corrupted.end()));
    });
    mod.def("auc_cr", &auc_cr);
    mod.def("spearman", &spearman);
}
