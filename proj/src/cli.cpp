#include "mhdsc/cli.hpp"

#include "mhdsc/dataset.hpp"
#include "mhdsc/eval.hpp"
#include "mhdsc/inference.hpp"
#include "mhdsc/matrix_io.hpp"
#include "mhdsc/solver.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace mhdsc {

namespace {

Manifold parse_manifold(const std::string& s)
{
    if (s == "none") return Manifold::none;
    if (s == "grid2d") return Manifold::grid2d;
    if (s == "swiss_roll") return Manifold::swiss_roll;
    throw ValidationError("unknown manifold '" + s + "' (expected none, grid2d or swiss_roll)");
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

std::string join(const std::vector<int>& xs)
{
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

std::vector<int> split_ints(const std::string& s)
{
    std::vector<int> xs;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) xs.push_back(std::stoi(tok));
    return xs;
}

// View selection, concatenation and normalisation recorded in the model, so
// test data goes through the same pipeline as the training data.
struct Preprocess
{
    std::vector<int> views;
    bool concatenate = false;
    Normalization normalize = Normalization::unit;
    std::string normalize_name = "unit";

    MultiviewDataset apply(const MultiviewDataset& d) const
    {
        MultiviewDataset out = views.empty() ? d : select_views(d, views);
        if (concatenate) out = concatenate_views(out);
        return apply_normalization(out, normalize);
    }

    void store(std::map<std::string, std::string>& meta) const
    {
        meta["views"] = join(views);
        meta["concatenate"] = concatenate ? "1" : "0";
        meta["normalize"] = normalize_name;
    }

    static Preprocess from(const std::map<std::string, std::string>& meta)
    {
        Preprocess p;
        if (auto it = meta.find("views"); it != meta.end() && !it->second.empty()) p.views = split_ints(it->second);
        if (auto it = meta.find("concatenate"); it != meta.end()) p.concatenate = it->second == "1";
        if (auto it = meta.find("normalize"); it != meta.end()) {
            p.normalize_name = it->second;
            p.normalize = parse_normalization(it->second);
        }
        return p;
    }
};

void write_trace(std::ostream& out, const std::vector<ObjectiveBreakdown>& trace)
{
    out << "iteration\trecon_labelled\trecon_unlabelled\tsparsity_W\tsparsity_D\tmanifold\ttotal\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& t = trace[i];
        out << i << '\t' << format_real(t.recon_labelled) << '\t' << format_real(t.recon_unlabelled) << '\t'
            << format_real(t.sparsity_W) << '\t' << format_real(t.sparsity_D) << '\t' << format_real(t.manifold)
            << '\t' << format_real(t.total) << '\n';
    }
}

struct SynthArgs
{
    int views = 3;
    std::vector<long long> dims{8};
    long long classes = 4, samples = 120, atoms = 10, sparsity = 2;
    double noise = 0.0;
    std::string manifold = "none";
    std::uint64_t seed = 0;
    std::string out, truth, test_out;
    long long n_test = 0;
};

struct TrainArgs
{
    std::string data, out, trace;
    Hyperparams hp;
    std::string regularizer = "hessian";
    std::string weighting = "binary";
    double labelled_fraction = 0.0;  // 0: keep the file's labelled block
    std::string normalize = "unit";
    std::vector<int> views;
    bool concatenate = false;
    std::uint64_t seed = 0;
};

struct EncodeArgs
{
    std::string model, data, out;
    double gamma1_infer = -1.0;  // negative: use the model's gamma1
    int max_iters = EncodeConfig{}.max_iters;
    double tol = EncodeConfig{}.tol;

    EncodeConfig config(const ModelState& m) const
    {
        EncodeConfig cfg;
        cfg.gamma1_infer = gamma1_infer < 0.0 ? m.hyper.gamma1 : gamma1_infer;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        return cfg;
    }
};

struct PredictArgs
{
    EncodeArgs enc;
    std::string head = "inference";
    std::string train_data;
    double ridge = 1e-8;
    bool binarize = false;
    double threshold = 0.5;
};

struct EvalArgs
{
    std::string scores, data, out;
};

void add_encode_flags(CLI::App* cmd, EncodeArgs& a)
{
    cmd->add_option("--model", a.model, "Model file")->required();
    cmd->add_option("--data", a.data, "Dataset file (MVDS)")->required();
    cmd->add_option("--out", a.out, "Output file")->required();
    cmd->add_option("--gamma1-infer", a.gamma1_infer, "l1 weight for encoding (default: the model's gamma1)");
    cmd->add_option("--max-iters", a.max_iters, "Encoder iteration cap")->capture_default_str();
    cmd->add_option("--tol", a.tol, "Encoder tolerance")->capture_default_str();
}

int cmd_synth(const SynthArgs& a, std::ostream& out)
{
    SynthSpec spec;
    spec.views = a.views;
    spec.dims.assign(a.dims.begin(), a.dims.end());
    spec.classes = a.classes;
    spec.samples = a.samples;
    spec.atoms = a.atoms;
    spec.sparsity = a.sparsity;
    spec.noise_sigma = a.noise;
    spec.manifold = parse_manifold(a.manifold);
    spec.seed = a.seed;
    if (a.n_test > 0 && a.test_out.empty()) throw ValidationError("--n-test needs --test-out");

    const SynthResult res = synth_multiview(spec);
    save_dataset(res.data, a.out);
    if (!a.truth.empty()) {
        const GroundTruth& t = res.truth;
        std::vector<Matrix> ms = t.dictionaries;
        ms.push_back(t.codes);
        ms.push_back(t.label_map);
        ms.push_back(t.label_threshold);
        ms.push_back(t.manifold_coords);
        ms.push_back(t.embedding);
        save_matrices(ms, a.truth);
    }
    if (a.n_test > 0) {
        // Held-out draws use a stream separate from the training draw.
        const SynthResult test = synth_from_truth(spec, res.truth, a.n_test, a.seed ^ 0x7465737473657473ULL);
        save_dataset(test.data, a.test_out);
    }
    out << "wrote " << a.out << " (V=" << res.data.num_views() << " N=" << res.data.total_count << ")\n";
    return exit_ok;
}

int cmd_train(TrainArgs a, std::ostream& out)
{
    a.hp.regularizer = parse_regularizer_kind(a.regularizer);
    if (a.weighting == "binary") {
        a.hp.laplacian_weighting = LaplacianWeighting::binary;
    } else if (a.weighting == "heat") {
        a.hp.laplacian_weighting = LaplacianWeighting::heat;
    } else {
        throw ValidationError("unknown weighting '" + a.weighting + "' (expected binary or heat)");
    }
    a.hp.validate();

    Preprocess pre;
    pre.views = a.views;
    pre.concatenate = a.concatenate;
    pre.normalize = parse_normalization(a.normalize);
    pre.normalize_name = a.normalize;

    MultiviewDataset data = pre.apply(load_dataset(a.data));
    if (a.labelled_fraction > 0.0) data = split_labelled(data, a.labelled_fraction, a.seed);

    FitResult res = fit(data, a.hp, a.seed);
    pre.store(res.state.metadata);
    res.state.metadata["seed"] = std::to_string(a.seed);
    res.state.metadata["labelled_fraction"] = format_real(a.labelled_fraction);
    save_model(res.state, a.out);
    if (!a.trace.empty()) {
        auto f = open_out(a.trace);
        write_trace(f, res.trace);
    }
    out << "outer iterations " << res.trace.size() - 1 << ", objective " << format_real(res.trace.back().total)
        << '\n';
    return exit_ok;
}

// Test data prepared the way the model's training data was.
MultiviewDataset load_for_model(const std::string& path, const ModelState& m)
{
    MultiviewDataset d = Preprocess::from(m.metadata).apply(load_dataset(path));
    if (d.num_views() != m.num_views()) {
        throw ValidationError("model has " + std::to_string(m.num_views()) + " views but '" + path + "' has " +
                              std::to_string(d.num_views()));
    }
    for (Index v = 0; v < d.num_views(); ++v) {
        if (d.views[static_cast<std::size_t>(v)].values.rows() != m.dictionaries[static_cast<std::size_t>(v)].rows()) {
            throw ValidationError("view " + std::to_string(v) + " of '" + path + "' does not match the model");
        }
    }
    return d;
}

int cmd_encode(const EncodeArgs& a, std::ostream& out)
{
    const ModelState m = load_model(a.model);
    const MultiviewDataset d = load_for_model(a.data, m);
    const Matrix codes = encode_dataset(m, d, a.config(m));
    auto f = open_out(a.out);
    write_matrix(f, codes.transpose());
    out << "encoded " << codes.cols() << " samples\n";
    return exit_ok;
}

int cmd_predict(const PredictArgs& a, std::ostream& out)
{
    const ModelState m = load_model(a.enc.model);
    const MultiviewDataset d = load_for_model(a.enc.data, m);
    const EncodeConfig cfg = a.enc.config(m);
    const Matrix codes = encode_dataset(m, d, cfg);

    Matrix scores;
    if (a.head == "inference") {
        scores = predict_scores(codes, m.label_dictionary());
    } else if (a.head == "ls") {
        if (a.train_data.empty()) throw ValidationError("--head ls needs --train-data");
        MultiviewDataset train = load_for_model(a.train_data, m);
        const double fraction = m.metadata.count("labelled_fraction") ? std::stod(m.metadata.at("labelled_fraction")) : 0.0;
        const std::uint64_t seed = m.metadata.count("seed") ? std::stoull(m.metadata.at("seed")) : 0;
        if (fraction > 0.0) train = split_labelled(train, fraction, seed);
        if (train.labelled_count != m.labelled_count || train.total_count != m.codes.cols()) {
            throw ValidationError("--train-data does not match the data the model was trained on");
        }
        MultiviewDataset labelled = train;
        for (auto& v : labelled.views) v.values = v.values.leftCols(train.labelled_count).eval();
        labelled.total_count = train.labelled_count;
        const Matrix head = train_ls_head(encode_dataset(m, labelled, cfg), train.labels, a.ridge);
        scores = head * codes;
    } else {
        throw ValidationError("unknown head '" + a.head + "' (expected inference or ls)");
    }
    if (a.binarize) scores = (scores.array() > a.threshold).cast<double>().matrix();

    auto f = open_out(a.enc.out);
    write_matrix(f, scores.transpose());
    out << "predicted " << scores.cols() << " samples\n";
    return exit_ok;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    const Matrix scores = load_matrix(a.scores);  // one row per sample
    const MultiviewDataset d = load_dataset(a.data);
    if (scores.rows() != d.total_count || scores.cols() != d.num_classes()) {
        throw ValidationError("scores are " + std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()) +
                              ", expected " + std::to_string(d.total_count) + "x" + std::to_string(d.num_classes()) +
                              " (samples x classes)");
    }
    const auto aps = per_class_ap(scores.topRows(d.labelled_count).transpose(), d.labels);

    std::ostringstream table;
    table << "class\tAP\n";
    std::vector<double> defined;
    for (std::size_t c = 0; c < aps.size(); ++c) {
        if (aps[c]) {
            table << c << '\t' << format_real(*aps[c]) << '\n';
            defined.push_back(*aps[c]);
        } else {
            table << c << "\tNA\n";
            err << "warning: class " << c << " has no positive samples; excluded from mAP\n";
        }
    }
    if (defined.empty()) throw ValidationError("no class has positive samples; mAP is undefined");
    table << "mAP\t" << format_real(mean_ap(defined)) << '\n';

    if (a.out.empty()) {
        out << table.str();
    } else {
        auto f = open_out(a.out);
        f << table.str();
    }
    return exit_ok;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multiview Hessian discriminative sparse coding", "mhdsc"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a planted multiview dataset");
    synth->add_option("--views", sa.views, "Number of feature views")->capture_default_str();
    synth->add_option("--dims", sa.dims, "Feature dimension, one value or one per view")->delimiter(',');
    synth->add_option("--classes", sa.classes, "Number of classes")->capture_default_str();
    synth->add_option("--n", sa.samples, "Number of samples")->capture_default_str();
    synth->add_option("--atoms", sa.atoms, "Ground-truth atom count")->capture_default_str();
    synth->add_option("--sparsity", sa.sparsity, "Nonzeros per code column")->capture_default_str();
    synth->add_option("--noise", sa.noise, "Gaussian noise level")->capture_default_str();
    synth->add_option("--manifold", sa.manifold, "none, grid2d or swiss_roll")->capture_default_str();
    synth->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    synth->add_option("--out", sa.out, "Dataset output file")->required();
    synth->add_option("--truth", sa.truth, "Ground-truth output file (MAT blocks)");
    synth->add_option("--n-test", sa.n_test, "Held-out samples drawn from the same ground truth");
    synth->add_option("--test-out", sa.test_out, "Held-out dataset output file");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Fit a model");
    train->add_option("--data", ta.data, "Dataset file (MVDS)")->required();
    train->add_option("--out", ta.out, "Model output file")->required();
    train->add_option("--trace", ta.trace, "Objective trace output (TSV)");
    train->add_option("--gamma1", ta.hp.gamma1, "Code sparsity weight")->capture_default_str();
    train->add_option("--gamma2", ta.hp.gamma2, "Dictionary sparsity weight")->capture_default_str();
    train->add_option("--gamma3", ta.hp.gamma3, "Manifold weight")->capture_default_str();
    train->add_option("--r", ta.hp.r, "View-weight exponent (> 1)")->capture_default_str();
    train->add_option("--atoms", ta.hp.atoms, "Dictionary size")->capture_default_str();
    train->add_option("--neighbors", ta.hp.neighbors, "Neighbour count for the graph regulariser (100 in large-scale use)")
        ->capture_default_str();
    train->add_option("--tangent-dim", ta.hp.tangent_dim, "Tangent dimension of the Hessian fit")->capture_default_str();
    train->add_option("--hessian-ridge", ta.hp.hessian_ridge, "Relative ridge of the local fits")->capture_default_str();
    train->add_option("--regularizer", ta.regularizer, "hessian, laplacian or none")->capture_default_str();
    train->add_option("--weighting", ta.weighting, "Laplacian edge weights: binary or heat")->capture_default_str();
    train->add_option("--heat-sigma", ta.hp.heat_sigma, "Heat kernel width")->capture_default_str();
    train->add_flag("--label-view-regularizer", ta.hp.label_view_regularizer,
                    "Add a regulariser built on the labels (zero-padded to N)");
    train->add_flag("--trace-normalize", ta.hp.trace_normalize, "Scale every regulariser to unit trace");
    train->add_option("--labelled-fraction", ta.labelled_fraction, "Fraction of samples kept labelled");
    train->add_option("--normalize", ta.normalize, "unit, zscore or none")->capture_default_str();
    train->add_option("--views", ta.views, "Keep only these feature views (0-based)")->delimiter(',');
    train->add_flag("--concatenate", ta.concatenate, "Stack all feature views into one");
    train->add_option("--outer-iters", ta.hp.outer_max_iters, "Outer iteration cap")->capture_default_str();
    train->add_option("--inner-iters", ta.hp.inner_max_iters, "Inner iteration cap")->capture_default_str();
    train->add_option("--outer-tol", ta.hp.outer_tol, "Outer relative tolerance")->capture_default_str();
    train->add_option("--inner-tol", ta.hp.inner_tol, "Inner relative tolerance")->capture_default_str();
    train->add_option("--seed", ta.seed, "Random seed")->capture_default_str();

    EncodeArgs ea;
    auto* enc = app.add_subcommand("encode", "Encode samples with a trained model (one code row per sample)");
    add_encode_flags(enc, ea);

    PredictArgs pa;
    auto* pred = app.add_subcommand("predict", "Predict class scores (one row per sample)");
    add_encode_flags(pred, pa.enc);
    pred->add_option("--head", pa.head, "inference or ls")->capture_default_str();
    pred->add_option("--train-data", pa.train_data, "Training dataset, needed by the ls head");
    pred->add_option("--ridge", pa.ridge, "Ridge of the ls head")->capture_default_str();
    pred->add_flag("--binarize", pa.binarize, "Emit 0/1 labels instead of scores");
    pred->add_option("--threshold", pa.threshold, "Threshold used by --binarize")->capture_default_str();

    EvalArgs va;
    auto* ev = app.add_subcommand("eval", "Per-class AP and mAP of a scores file");
    ev->add_option("--scores", va.scores, "Scores file (samples x classes)")->required();
    ev->add_option("--data", va.data, "Dataset with the true labels")->required();
    ev->add_option("--out", va.out, "Output TSV (default: stdout)");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        if (*synth) return cmd_synth(sa, out);
        if (*train) return cmd_train(ta, out);
        if (*enc) return cmd_encode(ea, out);
        if (*pred) return cmd_predict(pa, out);
        if (*ev) return cmd_eval(va, out, err);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        err << "error: malformed number in model metadata\n";
        return exit_validation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_failure;
}

} // namespace mhdsc
