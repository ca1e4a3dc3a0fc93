#include "mhdsc/cli.hpp"
#include "mhdsc/dataset.hpp"
#include "mhdsc/eval.hpp"
#include "mhdsc/inference.hpp"
#include "mhdsc/matrix_io.hpp"
#include "mhdsc/prox.hpp"
#include "mhdsc/solver.hpp"

#include <doctest.h>

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

using namespace mhdsc;
namespace fs = std::filesystem;

namespace {

struct TempDir
{
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() / ("mhdsc_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run
{
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> tsv_column(const std::string& text, std::size_t col)
{
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> xs;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string field;
        for (std::size_t c = 0; c <= col; ++c) std::getline(ls, field, '\t');
        xs.push_back(std::stod(field));
    }
    return xs;
}

std::string last_line(const std::string& text)
{
    const auto end = text.find_last_not_of('\n');
    const auto start = text.rfind('\n', end);
    return text.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

} // namespace

TEST_CASE("synth is deterministic and validates its parameters")
{
    TempDir tmp;
    REQUIRE(run({"synth", "--views", "3", "--n", "120", "--seed", "7", "--out", tmp / "a.txt"}).code == 0);
    REQUIRE(run({"synth", "--views", "3", "--n", "120", "--seed", "7", "--out", tmp / "b.txt"}).code == 0);
    CHECK(slurp(tmp / "a.txt") == slurp(tmp / "b.txt"));
    CHECK(load_dataset(tmp / "a.txt").total_count == 120);

    const Run bad = run({"synth", "--sparsity", "12", "--atoms", "10", "--out", tmp / "c.txt"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("sparsity") != std::string::npos);
    CHECK(run({"synth", "--manifold", "torus", "--out", tmp / "c.txt"}).code == 2);
    CHECK(run({"synth"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("noiseless synth files reload to zero reconstruction at the truth")
{
    TempDir tmp;
    REQUIRE(run({"synth", "--n", "50", "--noise", "0", "--seed", "3", "--out", tmp / "d.txt", "--truth", tmp / "t.txt"}).code == 0);
    const MultiviewDataset d = load_dataset(tmp / "d.txt");
    const std::vector<Matrix> truth = load_matrices(tmp / "t.txt");
    REQUIRE(truth.size() == 3 + 5);
    ModelState s;
    s.dictionaries.assign(truth.begin(), truth.begin() + 3);
    s.dictionaries.push_back(Matrix::Zero(d.num_classes(), truth[3].rows()));
    s.codes = truth[3];
    s.labelled_count = d.labelled_count;
    CHECK(feature_reconstruction(s, d) <= 1e-24);
}

TEST_CASE("train: zero outer iterations gives the initialisation; trace is monotone")
{
    TempDir tmp;
    REQUIRE(run({"synth", "--n", "60", "--noise", "0.05", "--seed", "4", "--out", tmp / "d.txt"}).code == 0);
    REQUIRE(run({"train", "--data", tmp / "d.txt", "--out", tmp / "m0.bin", "--outer-iters", "0", "--seed", "5",
                 "--labelled-fraction", "0.5"}).code == 0);
    const ModelState m0 = load_model(tmp / "m0.bin");
    Hyperparams hp;
    hp.outer_max_iters = 0;
    const MultiviewDataset d = split_labelled(normalize_views(load_dataset(tmp / "d.txt")), 0.5, 5);
    const ModelState init = initialize(d, hp, 3, 5);
    for (std::size_t v = 0; v < init.dictionaries.size(); ++v) CHECK(m0.dictionaries[v] == init.dictionaries[v]);
    CHECK(m0.codes == init.codes);

    REQUIRE(run({"train", "--data", tmp / "d.txt", "--out", tmp / "m.bin", "--trace", tmp / "trace.tsv", "--seed", "5",
                 "--gamma3", "0.01", "--outer-iters", "10"}).code == 0);
    const std::vector<double> total = tsv_column(slurp(tmp / "trace.tsv"), 6);
    REQUIRE(total.size() >= 2);
    for (std::size_t k = 1; k < total.size(); ++k) CHECK(total[k] <= total[k - 1] + 1e-8 * std::abs(total[k - 1]));
    CHECK(slurp(tmp / "trace.tsv").rfind("iteration\trecon_labelled", 0) == 0);

    CHECK(run({"train", "--data", tmp / "d.txt", "--out", tmp / "x.bin", "--r", "1"}).code == 2);
    CHECK(run({"train", "--data", tmp / "missing.txt", "--out", tmp / "x.bin"}).code == 2);
    CHECK(run({"train", "--data", tmp / "d.txt", "--out", tmp / "x.bin", "--regularizer", "hyper"}).code == 2);
}

TEST_CASE("train reports numerical failures with exit code 3")
{
    TempDir tmp;
    // Every sample on one line: the 2-D local Hessian fits are rank-deficient.
    MultiviewDataset d;
    d.views.push_back({Matrix(2, 20), 0});
    for (Index j = 0; j < 20; ++j) d.views[0].values.col(j) << 1.0 + j, 2.0 * (1.0 + j);
    d.labels = Matrix::Ones(1, 20);
    d.labelled_count = d.total_count = 20;
    save_dataset(d, tmp / "line.txt");
    const Run r = run({"train", "--data", tmp / "line.txt", "--out", tmp / "m.bin", "--normalize", "none",
                       "--neighbors", "6"});
    CHECK(r.code == 3);
    CHECK(r.err.find("sample") != std::string::npos);
}

TEST_CASE("predict: zero model, identity toy and API equivalence")
{
    TempDir tmp;
    // Identity toy: one 3-D view, identity feature and label dictionaries.
    MultiviewDataset d;
    d.views.push_back({Matrix(3, 4), 0});
    d.views[0].values << 0.9, -0.2, 0.05, 2.0,
                         0.1, 0.7, -1.5, 0.0,
                         -0.3, 0.25, 0.6, 1.0;
    d.labels = Matrix::Zero(3, 4);
    d.labels(0, 0) = 1;
    d.labelled_count = d.total_count = 4;
    save_dataset(d, tmp / "toy.txt");

    ModelState m;
    m.dictionaries = {Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
    m.codes = Matrix::Zero(3, 4);
    m.labelled_count = 4;
    m.alpha = Vector::Ones(1);
    m.metadata["normalize"] = "none";
    save_model(m, tmp / "id.bin");
    REQUIRE(run({"predict", "--model", tmp / "id.bin", "--data", tmp / "toy.txt", "--out", tmp / "s.txt",
                 "--gamma1-infer", "0.3"}).code == 0);
    const Matrix s = load_matrix(tmp / "s.txt");
    REQUIRE(s.rows() == 4);
    for (Index j = 0; j < 4; ++j) {
        CHECK((s.row(j).transpose() - soft_threshold(d.views[0].values.col(j), 0.3)).cwiseAbs().maxCoeff() <= 1e-12);
    }

    m.dictionaries = {Matrix::Zero(3, 3), Matrix::Zero(3, 3)};
    save_model(m, tmp / "zero.bin");
    REQUIRE(run({"predict", "--model", tmp / "zero.bin", "--data", tmp / "toy.txt", "--out", tmp / "z.txt"}).code == 0);
    CHECK(load_matrix(tmp / "z.txt").norm() == 0.0);

    // Trained model: CLI scores equal the library path bit for bit.
    REQUIRE(run({"synth", "--n", "50", "--noise", "0.05", "--seed", "9", "--out", tmp / "d.txt", "--n-test", "20",
                 "--test-out", tmp / "test.txt"}).code == 0);
    REQUIRE(run({"train", "--data", tmp / "d.txt", "--out", tmp / "m.bin", "--outer-iters", "5", "--gamma3", "0.01",
                 "--labelled-fraction", "0.4", "--seed", "2"}).code == 0);
    REQUIRE(run({"predict", "--model", tmp / "m.bin", "--data", tmp / "test.txt", "--out", tmp / "p.txt"}).code == 0);
    const ModelState model = load_model(tmp / "m.bin");
    const MultiviewDataset test = normalize_views(load_dataset(tmp / "test.txt"));
    EncodeConfig cfg;
    cfg.gamma1_infer = model.hyper.gamma1;
    const Matrix api = predict_scores(encode_dataset(model, test, cfg), model.label_dictionary()).transpose();
    CHECK(load_matrix(tmp / "p.txt") == api);

    REQUIRE(run({"encode", "--model", tmp / "m.bin", "--data", tmp / "test.txt", "--out", tmp / "c.txt"}).code == 0);
    CHECK(load_matrix(tmp / "c.txt") == encode_dataset(model, test, cfg).transpose());

    REQUIRE(run({"predict", "--model", tmp / "m.bin", "--data", tmp / "test.txt", "--out", tmp / "ls.txt", "--head",
                 "ls", "--train-data", tmp / "d.txt"}).code == 0);
    CHECK(load_matrix(tmp / "ls.txt").rows() == 20);
    REQUIRE(run({"predict", "--model", tmp / "m.bin", "--data", tmp / "test.txt", "--out", tmp / "b.txt",
                 "--binarize"}).code == 0);
    const Matrix bin = load_matrix(tmp / "b.txt");
    CHECK(((bin.array() == 0.0) || (bin.array() == 1.0)).all());
    CHECK(bin == (api.array() > 0.5).cast<double>().matrix());

    CHECK(run({"predict", "--model", tmp / "m.bin", "--data", tmp / "test.txt", "--out", tmp / "x.txt", "--head",
               "ls"}).code == 2);
    CHECK(run({"predict", "--model", tmp / "m.bin", "--data", tmp / "toy.txt", "--out", tmp / "x.txt"}).code == 2);
    CHECK(run({"predict", "--model", tmp / "toy.txt", "--data", tmp / "toy.txt", "--out", tmp / "x.txt"}).code == 1);
}

TEST_CASE("eval: perfect scores, the hand-traced case and NA classes")
{
    TempDir tmp;
    MultiviewDataset d;
    d.views.push_back({Matrix::Ones(1, 3), 0});
    d.labels = Matrix(2, 3);
    d.labels << 1, 0, 1,
                0, 1, 0;
    d.labelled_count = d.total_count = 3;
    save_dataset(d, tmp / "d.txt");

    Matrix s(3, 2);
    s << 0.9, 0.1,
         0.8, 0.9,
         0.7, 0.2;
    save_matrix(s, tmp / "s.txt");
    const Run r = run({"eval", "--scores", tmp / "s.txt", "--data", tmp / "d.txt"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("class\tAP\n0\t", 0) == 0);
    CHECK(r.out.find("\n1\t1\n") != std::string::npos);
    CHECK(std::stod(r.out.substr(r.out.find("0\t") + 2)) == 28.0 / 33.0);
    CHECK(last_line(r.out) == "mAP\t" + format_real(mean_ap({28.0 / 33.0, 1.0})));

    Matrix perfect = d.labels.transpose();
    save_matrix(perfect, tmp / "p.txt");
    CHECK(last_line(run({"eval", "--scores", tmp / "p.txt", "--data", tmp / "d.txt"}).out) == "mAP\t1");

    d.labels.row(1).setZero();
    save_dataset(d, tmp / "na.txt");
    const Run na = run({"eval", "--scores", tmp / "s.txt", "--data", tmp / "na.txt", "--out", tmp / "e.tsv"});
    CHECK(na.code == 0);
    CHECK(na.err.find("warning") != std::string::npos);
    const std::string table = slurp(tmp / "e.tsv");
    CHECK(table.find("1\tNA\n") != std::string::npos);
    CHECK(last_line(table) == "mAP\t" + format_real(28.0 / 33.0));

    save_matrix(Matrix::Ones(2, 2), tmp / "bad.txt");
    CHECK(run({"eval", "--scores", tmp / "bad.txt", "--data", tmp / "d.txt"}).code == 2);
}

TEST_CASE("every command is byte-for-byte reproducible")
{
    TempDir tmp;
    for (const char* tag : {"1", "2"}) {
        const std::string t(tag);
        REQUIRE(run({"synth", "--n", "40", "--manifold", "grid2d", "--noise", "0.01", "--seed", "11", "--out",
                     tmp / ("d" + t), "--truth", tmp / ("t" + t), "--n-test", "15", "--test-out", tmp / ("x" + t)}).code == 0);
        REQUIRE(run({"train", "--data", tmp / ("d" + t), "--out", tmp / ("m" + t), "--trace", tmp / ("tr" + t),
                     "--outer-iters", "4", "--labelled-fraction", "0.5", "--seed", "3", "--gamma3", "0.01"}).code == 0);
        REQUIRE(run({"encode", "--model", tmp / ("m" + t), "--data", tmp / ("x" + t), "--out", tmp / ("c" + t)}).code == 0);
        REQUIRE(run({"predict", "--model", tmp / ("m" + t), "--data", tmp / ("x" + t), "--out", tmp / ("p" + t)}).code == 0);
        REQUIRE(run({"eval", "--scores", tmp / ("p" + t), "--data", tmp / ("x" + t), "--out", tmp / ("e" + t)}).code == 0);
    }
    for (const char* f : {"d", "t", "x", "m", "tr", "c", "p", "e"}) {
        CHECK_MESSAGE(slurp(tmp / (std::string(f) + "1")) == slurp(tmp / (std::string(f) + "2")), f);
    }
}
