#include "mhdsc/cli.hpp"
#include "mhdsc/dataset.hpp"
#include "mhdsc/eval.hpp"
#include "mhdsc/graph.hpp"
#include "mhdsc/inference.hpp"
#include "mhdsc/prox.hpp"
#include "mhdsc/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace mhdsc;

namespace {

MultiviewDataset make_dataset(const std::vector<Matrix>& views, const Matrix& labels, Index labelled_count)
{
    MultiviewDataset d;
    for (std::size_t v = 0; v < views.size(); ++v) d.views.push_back({views[v], static_cast<int>(v)});
    d.labels = labels;
    d.labelled_count = labelled_count;
    d.total_count = views.empty() ? 0 : views[0].cols();
    d.validate();
    return d;
}

std::vector<Matrix> view_values(const MultiviewDataset& d)
{
    std::vector<Matrix> out;
    for (const auto& v : d.views) out.push_back(v.values);
    return out;
}

py::dict breakdown(const ObjectiveBreakdown& b)
{
    py::dict d;
    d["recon_labelled"] = b.recon_labelled;
    d["recon_unlabelled"] = b.recon_unlabelled;
    d["sparsity_W"] = b.sparsity_W;
    d["sparsity_D"] = b.sparsity_D;
    d["manifold"] = b.manifold;
    d["total"] = b.total;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Multiview Hessian discriminative sparse coding";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

    // dataset
    py::class_<MultiviewDataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("views"), py::arg("labels"), py::arg("labelled_count"))
        .def_property_readonly("views", &view_values)
        .def_readonly("labels", &MultiviewDataset::labels)
        .def_readonly("labelled_count", &MultiviewDataset::labelled_count)
        .def_readonly("total_count", &MultiviewDataset::total_count)
        .def_property_readonly("num_views", &MultiviewDataset::num_views)
        .def_property_readonly("num_classes", &MultiviewDataset::num_classes);

    m.def("synth_multiview",
          [](int views, std::vector<Index> dims, Index classes, Index samples, Index atoms, Index sparsity,
             double noise, const std::string& manifold, std::uint64_t seed) {
              SynthSpec s;
              s.views = views;
              s.dims = std::move(dims);
              s.classes = classes;
              s.samples = samples;
              s.atoms = atoms;
              s.sparsity = sparsity;
              s.noise_sigma = noise;
              s.manifold = manifold == "grid2d"       ? Manifold::grid2d
                           : manifold == "swiss_roll" ? Manifold::swiss_roll
                           : manifold == "none"       ? Manifold::none
                                                      : throw ValidationError("unknown manifold '" + manifold + "'");
              s.seed = seed;
              SynthResult r = synth_multiview(s);
              py::dict truth;
              truth["dictionaries"] = r.truth.dictionaries;
              truth["codes"] = r.truth.codes;
              truth["label_map"] = r.truth.label_map;
              truth["manifold_coords"] = r.truth.manifold_coords;
              return py::make_tuple(r.data, truth);
          },
          py::arg("views") = 3, py::arg("dims") = std::vector<Index>{8}, py::arg("classes") = 4,
          py::arg("samples") = 120, py::arg("atoms") = 10, py::arg("sparsity") = 2, py::arg("noise") = 0.0,
          py::arg("manifold") = "none", py::arg("seed") = 0);
    m.def("load_dataset", &load_dataset);
    m.def("save_dataset", &save_dataset);
    m.def("normalize_views", &normalize_views);
    m.def("split_labelled", &split_labelled, py::arg("data"), py::arg("fraction"), py::arg("seed"));

    // graph
    m.def("knn_graph", [](const Matrix& x, Index k) { return knn_graph(x, k).neighbor_ids; });
    m.def("hessian_energy",
          [](const Matrix& x, Index k, Index m_, double ridge) { return hessian_energy(x, {k, m_, ridge}).values; },
          py::arg("x"), py::arg("k") = 10, py::arg("tangent_dim") = 2, py::arg("ridge") = 1e-6);
    m.def("laplacian",
          [](const Matrix& x, Index k, const std::string& weighting, double sigma) {
              LaplacianConfig c{k, weighting == "heat" ? LaplacianWeighting::heat : LaplacianWeighting::binary, sigma};
              return laplacian(x, c).values;
          },
          py::arg("x"), py::arg("k") = 10, py::arg("weighting") = "binary", py::arg("sigma") = 1.0);

    // prox
    m.def("project_l1_ball", &project_l1_ball, py::arg("v"), py::arg("radius"));
    m.def("prox_linf", &prox_linf, py::arg("v"), py::arg("lam"));
    m.def("prox_l1inf_rows", &prox_l1inf_rows, py::arg("m"), py::arg("lam"));
    m.def("soft_threshold", &soft_threshold, py::arg("v"), py::arg("lam"));
    m.def("project_unit_columns", &project_unit_columns);

    // solver
    py::class_<Hyperparams>(m, "Hyperparams")
        .def(py::init<>())
        .def_readwrite("gamma1", &Hyperparams::gamma1)
        .def_readwrite("gamma2", &Hyperparams::gamma2)
        .def_readwrite("gamma3", &Hyperparams::gamma3)
        .def_readwrite("r", &Hyperparams::r)
        .def_readwrite("atoms", &Hyperparams::atoms)
        .def_readwrite("inner_max_iters", &Hyperparams::inner_max_iters)
        .def_readwrite("outer_max_iters", &Hyperparams::outer_max_iters)
        .def_readwrite("inner_tol", &Hyperparams::inner_tol)
        .def_readwrite("outer_tol", &Hyperparams::outer_tol)
        .def_readwrite("neighbors", &Hyperparams::neighbors)
        .def_readwrite("tangent_dim", &Hyperparams::tangent_dim)
        .def_property(
            "regularizer", [](const Hyperparams& h) { return to_string(h.regularizer); },
            [](Hyperparams& h, const std::string& s) { h.regularizer = parse_regularizer_kind(s); });

    py::class_<ModelState>(m, "Model")
        .def_readonly("dictionaries", &ModelState::dictionaries)
        .def_readonly("codes", &ModelState::codes)
        .def_readonly("alpha", &ModelState::alpha)
        .def_readonly("labelled_count", &ModelState::labelled_count)
        .def_readonly("metadata", &ModelState::metadata)
        .def_property_readonly("label_dictionary", &ModelState::label_dictionary)
        .def("save", [](const ModelState& s, const std::string& path) { save_model(s, path); });
    m.def("load_model", &load_model);

    m.def("fit",
          [](const MultiviewDataset& d, const Hyperparams& hp, std::uint64_t seed) {
              FitResult r = fit(d, hp, seed);
              py::list trace;
              for (const auto& t : r.trace) trace.append(breakdown(t));
              return py::make_tuple(r.state, trace);
          },
          py::arg("data"), py::arg("hyperparams") = Hyperparams{}, py::arg("seed") = 0);
    m.def("fista_tau_next", &fista_tau_next);
    m.def("spectral_norm", [](const Matrix& x) { return spectral_norm(x); });
    m.def("alpha_from_energies", &alpha_from_energies, py::arg("energies"), py::arg("r"));

    // inference
    m.def("encode",
          [](const ModelState& s, const MultiviewDataset& d, double gamma1_infer) {
              EncodeConfig c;
              c.gamma1_infer = gamma1_infer;
              return encode_dataset(s, d, c);
          },
          py::arg("model"), py::arg("data"), py::arg("gamma1_infer") = EncodeConfig{}.gamma1_infer);
    m.def("predict_scores", &predict_scores, py::arg("codes"), py::arg("label_dictionary"));
    m.def("train_ls_head", &train_ls_head, py::arg("codes"), py::arg("labels"), py::arg("ridge") = 1e-8);

    // eval
    m.def("average_precision", [](const Vector& s, const Vector& r) { return average_precision({s, r}); },
          py::arg("scores"), py::arg("relevance"));
    m.def("mean_ap", &mean_ap);

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    });
}
