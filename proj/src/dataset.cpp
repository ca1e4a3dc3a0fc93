#include "mhdsc/dataset.hpp"

#include "mhdsc/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace mhdsc {

void MultiviewDataset::validate() const
{
    if (views.empty()) throw ValidationError("dataset has no views");
    if (total_count < 1) throw ValidationError("dataset has no samples");
    if (labelled_count < 1 || labelled_count > total_count) {
        throw ValidationError("labelled count " + std::to_string(labelled_count) +
                              " outside [1, " + std::to_string(total_count) + "]");
    }
    for (const auto& v : views) {
        if (v.values.cols() != total_count) {
            throw ValidationError("view " + std::to_string(v.view_id) + " has " +
                                  std::to_string(v.values.cols()) + " columns, expected " +
                                  std::to_string(total_count));
        }
        if (v.values.rows() < 1) {
            throw ValidationError("view " + std::to_string(v.view_id) + " has no features");
        }
        if (!v.values.allFinite()) {
            throw ValidationError("view " + std::to_string(v.view_id) + " has non-finite entries");
        }
    }
    if (labels.cols() != labelled_count) {
        throw ValidationError("label matrix has " + std::to_string(labels.cols()) +
                              " columns, expected " + std::to_string(labelled_count));
    }
    if (labels.rows() < 1) throw ValidationError("label matrix has no classes");
    for (Index j = 0; j < labels.cols(); ++j) {
        for (Index i = 0; i < labels.rows(); ++i) {
            const double y = labels(i, j);
            if (y != 0.0 && y != 1.0) {
                throw ValidationError("label not in {0,1} at class " + std::to_string(i) +
                                      ", sample " + std::to_string(j));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic data

void SynthSpec::validate() const
{
    if (views < 1) throw ValidationError("synth: view count must be positive");
    if (dims.empty() || (dims.size() != 1 && dims.size() != static_cast<std::size_t>(views))) {
        throw ValidationError("synth: need one dimension or one per view");
    }
    for (auto p : dims) {
        if (p < 1) throw ValidationError("synth: view dimensions must be positive");
    }
    if (classes < 1) throw ValidationError("synth: class count must be positive");
    if (samples < 1) throw ValidationError("synth: sample count must be positive");
    if (atoms < 1) throw ValidationError("synth: atom count must be positive");
    if (sparsity < 1) throw ValidationError("synth: sparsity must be positive");
    if (sparsity > atoms) {
        throw ValidationError("synth: sparsity " + std::to_string(sparsity) + " exceeds atom count " +
                              std::to_string(atoms));
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ValidationError("synth: noise must be a finite nonnegative number");
    }
    const Index ambient = manifold == Manifold::grid2d ? 2 : manifold == Manifold::swiss_roll ? 3 : 0;
    if (ambient > atoms) {
        throw ValidationError("synth: manifold needs at least " + std::to_string(ambient) + " atoms");
    }
}

namespace {

using Rng = std::mt19937_64;

Matrix gaussian(Rng& rng, Index rows, Index cols)
{
    std::normal_distribution<double> n01;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
    return m;
}

void normalize_columns(Matrix& m)
{
    for (Index j = 0; j < m.cols(); ++j) {
        const double n = m.col(j).norm();
        if (n > 0.0) m.col(j) /= n;
    }
}

// Fisher-Yates prefix: first `k` entries of a random permutation of [0, n).
std::vector<Index> sample_without_replacement(Rng& rng, Index n, Index k)
{
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

Index ambient_dim(Manifold m)
{
    switch (m) {
    case Manifold::grid2d: return 2;
    case Manifold::swiss_roll: return 3;
    case Manifold::none: break;
    }
    return 0;
}

// Columns: [offset, e_1, ..., e_ambient], supported on one shared random set of
// atoms; the direction columns are orthonormal so the embedding is isometric.
Matrix make_embedding(Rng& rng, const SynthSpec& spec)
{
    const Index ambient = ambient_dim(spec.manifold);
    const Index support_size = std::max(spec.sparsity, ambient);
    const auto support = sample_without_replacement(rng, spec.atoms, support_size);
    Matrix local = gaussian(rng, support_size, ambient + 1);
    Eigen::HouseholderQR<Matrix> qr(local.rightCols(ambient));
    Matrix q = qr.householderQ() * Matrix::Identity(support_size, ambient);
    local.rightCols(ambient) = q;
    local.col(0) *= 0.5;
    Matrix emb = Matrix::Zero(spec.atoms, ambient + 1);
    for (Index i = 0; i < support_size; ++i) emb.row(support[static_cast<std::size_t>(i)]) = local.row(i);
    return emb;
}

// Intrinsic coordinates (N x 2) and ambient points (N x ambient).
void sample_manifold(Rng& rng, Manifold m, Index n, bool on_grid, Matrix& intrinsic, Matrix& ambient)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    intrinsic.resize(n, 2);
    if (m == Manifold::grid2d) {
        const auto side = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n))));
        const double h = side > 1 ? 2.0 / static_cast<double>(side - 1) : 0.0;
        for (Index i = 0; i < n; ++i) {
            if (on_grid) {
                intrinsic(i, 0) = -1.0 + h * static_cast<double>(i % side);
                intrinsic(i, 1) = -1.0 + h * static_cast<double>(i / side);
            } else {
                intrinsic(i, 0) = -1.0 + 2.0 * unit(rng);
                intrinsic(i, 1) = -1.0 + 2.0 * unit(rng);
            }
        }
        ambient = intrinsic;
        return;
    }
    // Swiss roll: angle t in [1.5 pi, 4.5 pi], height in [0, 1].
    const double t0 = 1.5 * std::numbers::pi, t1 = 4.5 * std::numbers::pi;
    const double scale = 1.0 / t1;
    ambient.resize(n, 3);
    for (Index i = 0; i < n; ++i) {
        const double t = t0 + (t1 - t0) * unit(rng);
        const double y = unit(rng);
        intrinsic(i, 0) = t;
        intrinsic(i, 1) = y;
        ambient(i, 0) = scale * t * std::cos(t);
        ambient(i, 1) = y;
        ambient(i, 2) = scale * t * std::sin(t);
    }
}

Matrix sparse_codes(Rng& rng, Index atoms, Index sparsity, Index n)
{
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    Matrix w = Matrix::Zero(atoms, n);
    for (Index j = 0; j < n; ++j) {
        for (Index a : sample_without_replacement(rng, atoms, sparsity)) {
            const double s = sign(rng) ? 1.0 : -1.0;
            w(a, j) = s * mag(rng);
        }
    }
    return w;
}

MultiviewDataset observe(Rng& rng, const SynthSpec& spec, const GroundTruth& truth,
                         const Matrix& codes)
{
    MultiviewDataset d;
    const Index n = codes.cols();
    std::normal_distribution<double> n01;
    for (int v = 0; v < spec.views; ++v) {
        ViewMatrix vm;
        vm.view_id = v;
        vm.values = truth.dictionaries[static_cast<std::size_t>(v)] * codes;
        if (spec.noise_sigma > 0.0) {
            for (Index j = 0; j < n; ++j)
                for (Index i = 0; i < vm.values.rows(); ++i)
                    vm.values(i, j) += spec.noise_sigma * n01(rng);
        }
        d.views.push_back(std::move(vm));
    }
    const Matrix scores = truth.label_map * codes;
    d.labels.resize(scores.rows(), n);
    for (Index c = 0; c < scores.rows(); ++c)
        for (Index j = 0; j < n; ++j) d.labels(c, j) = scores(c, j) > truth.label_threshold(c) ? 1.0 : 0.0;
    d.labelled_count = n;
    d.total_count = n;
    return d;
}

Matrix manifold_codes(Rng& rng, const SynthSpec& spec, const Matrix& embedding, Index n, bool on_grid,
                      Matrix& intrinsic)
{
    Matrix ambient;
    sample_manifold(rng, spec.manifold, n, on_grid, intrinsic, ambient);
    const Index k = ambient.cols();
    Matrix codes = embedding.col(0).replicate(1, n);
    codes.noalias() += embedding.rightCols(k) * ambient.transpose();
    return codes;
}

} // namespace

SynthResult synth_multiview(const SynthSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    SynthResult out;
    GroundTruth& truth = out.truth;

    for (int v = 0; v < spec.views; ++v) {
        Matrix d = gaussian(rng, spec.dim(v), spec.atoms);
        normalize_columns(d);
        truth.dictionaries.push_back(std::move(d));
    }
    truth.label_map = gaussian(rng, spec.classes, spec.atoms);

    if (spec.manifold == Manifold::none) {
        truth.codes = sparse_codes(rng, spec.atoms, spec.sparsity, spec.samples);
    } else {
        truth.embedding = make_embedding(rng, spec);
        truth.codes = manifold_codes(rng, spec, truth.embedding, spec.samples, true, truth.manifold_coords);
    }

    // Median threshold per class keeps both label values present.
    const Matrix scores = truth.label_map * truth.codes;
    truth.label_threshold.resize(spec.classes);
    for (Index c = 0; c < spec.classes; ++c) {
        std::vector<double> row(static_cast<std::size_t>(scores.cols()));
        for (Index j = 0; j < scores.cols(); ++j) row[static_cast<std::size_t>(j)] = scores(c, j);
        std::sort(row.begin(), row.end());
        const std::size_t mid = row.size() / 2;
        truth.label_threshold(c) = row.size() % 2 == 1 ? row[mid] - 1e-12 : 0.5 * (row[mid - 1] + row[mid]);
    }

    out.data = observe(rng, spec, truth, truth.codes);
    return out;
}

SynthResult synth_from_truth(const SynthSpec& spec, const GroundTruth& truth, Index samples,
                             std::uint64_t seed)
{
    spec.validate();
    if (samples < 1) throw ValidationError("synth: sample count must be positive");
    Rng rng(seed);
    SynthResult out;
    out.truth = truth;
    if (spec.manifold == Manifold::none) {
        out.truth.codes = sparse_codes(rng, spec.atoms, spec.sparsity, samples);
        out.truth.manifold_coords.resize(0, 0);
    } else {
        out.truth.codes = manifold_codes(rng, spec, truth.embedding, samples, false, out.truth.manifold_coords);
    }
    out.data = observe(rng, spec, out.truth, out.truth.codes);
    return out;
}

// ---------------------------------------------------------------------------
// Normalisation and splitting

Normalization parse_normalization(const std::string& name)
{
    if (name == "unit") return Normalization::unit;
    if (name == "zscore") return Normalization::zscore;
    if (name == "none") return Normalization::none;
    throw ValidationError("unknown normalization '" + name + "' (expected unit, zscore or none)");
}

MultiviewDataset normalize_views(const MultiviewDataset& d)
{
    MultiviewDataset out = d;
    for (auto& v : out.views) normalize_columns(v.values);
    return out;
}

MultiviewDataset zscore_views(const MultiviewDataset& d)
{
    MultiviewDataset out = d;
    for (auto& v : out.views) {
        const Index n = v.values.cols();
        for (Index i = 0; i < v.values.rows(); ++i) {
            auto row = v.values.row(i);
            const double mean = row.mean();
            row.array() -= mean;
            const double sd = n > 1 ? std::sqrt(row.squaredNorm() / static_cast<double>(n - 1)) : 0.0;
            if (sd > 0.0) row /= sd;
        }
    }
    return out;
}

MultiviewDataset apply_normalization(const MultiviewDataset& d, Normalization how)
{
    switch (how) {
    case Normalization::unit: return normalize_views(d);
    case Normalization::zscore: return zscore_views(d);
    case Normalization::none: break;
    }
    return d;
}

MultiviewDataset split_labelled(const MultiviewDataset& d, double fraction, std::uint64_t seed)
{
    d.validate();
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("labelled fraction must lie in (0, 1]");
    }
    const auto count = static_cast<Index>(std::floor(fraction * static_cast<double>(d.total_count) + 1e-9));
    if (count < 1) throw ValidationError("labelled fraction yields no labelled samples");
    if (count > d.labelled_count) {
        throw ValidationError("labelled fraction asks for " + std::to_string(count) +
                              " labelled samples but only " + std::to_string(d.labelled_count) +
                              " carry labels");
    }

    Rng rng(seed);
    auto chosen = sample_without_replacement(rng, d.labelled_count, count);
    std::sort(chosen.begin(), chosen.end());
    std::vector<char> taken(static_cast<std::size_t>(d.total_count), 0);
    std::vector<Index> order = chosen;
    for (Index j : chosen) taken[static_cast<std::size_t>(j)] = 1;
    for (Index j = 0; j < d.total_count; ++j)
        if (!taken[static_cast<std::size_t>(j)]) order.push_back(j);

    MultiviewDataset out;
    out.total_count = d.total_count;
    out.labelled_count = count;
    for (const auto& v : d.views) {
        ViewMatrix vm;
        vm.view_id = v.view_id;
        vm.values.resize(v.values.rows(), d.total_count);
        for (Index j = 0; j < d.total_count; ++j) vm.values.col(j) = v.values.col(order[static_cast<std::size_t>(j)]);
        out.views.push_back(std::move(vm));
    }
    out.labels.resize(d.labels.rows(), count);
    for (Index j = 0; j < count; ++j) out.labels.col(j) = d.labels.col(chosen[static_cast<std::size_t>(j)]);
    return out;
}

MultiviewDataset select_views(const MultiviewDataset& d, const std::vector<int>& keep)
{
    MultiviewDataset out;
    out.labels = d.labels;
    out.labelled_count = d.labelled_count;
    out.total_count = d.total_count;
    for (int v : keep) {
        if (v < 0 || v >= d.num_views()) throw ValidationError("view index " + std::to_string(v) + " out of range");
        out.views.push_back(d.views[static_cast<std::size_t>(v)]);
    }
    return out;
}

MultiviewDataset concatenate_views(const MultiviewDataset& d)
{
    Index rows = 0;
    for (const auto& v : d.views) rows += v.values.rows();
    ViewMatrix all;
    all.view_id = 0;
    all.values.resize(rows, d.total_count);
    Index r = 0;
    for (const auto& v : d.views) {
        all.values.middleRows(r, v.values.rows()) = v.values;
        r += v.values.rows();
    }
    MultiviewDataset out;
    out.views.push_back(std::move(all));
    out.labels = d.labels;
    out.labelled_count = d.labelled_count;
    out.total_count = d.total_count;
    return out;
}

// ---------------------------------------------------------------------------
// Text format

MultiviewDataset read_dataset(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("malformed header: empty file", line_no);

    std::istringstream header(line);
    std::vector<std::string> tok;
    for (std::string t; header >> t;) tok.push_back(t);
    if (tok.size() != 7 || tok[0] != "MVDS" || tok[1] != "v1") {
        throw ParseError("malformed header: expected 'MVDS v1 V=<int> N=<int> l=<int> Pc=<int> P=<int,...>'",
                         line_no);
    }
    const auto n_views = detail::parse_int_field(tok[2], "V", line_no);
    const auto n = static_cast<Index>(detail::parse_int_field(tok[3], "N", line_no));
    const auto l = static_cast<Index>(detail::parse_int_field(tok[4], "l", line_no));
    const auto pc = static_cast<Index>(detail::parse_int_field(tok[5], "Pc", line_no));
    if (tok[6].rfind("P=", 0) != 0) throw ParseError("malformed header: missing P=", line_no);
    std::vector<Index> dims;
    {
        std::stringstream ps(tok[6].substr(2));
        for (std::string item; std::getline(ps, item, ',');) {
            dims.push_back(static_cast<Index>(detail::parse_int_field("P=" + item, "P", line_no)));
        }
    }
    if (n_views < 1 || n < 1 || pc < 1) throw ParseError("malformed header: V, N and Pc must be positive", line_no);
    if (l < 1 || l > n) throw ParseError("malformed header: l must lie in [1, N]", line_no);
    if (static_cast<long long>(dims.size()) != n_views) {
        throw ParseError("malformed header: P lists " + std::to_string(dims.size()) + " dimensions for V=" +
                             std::to_string(n_views),
                         line_no);
    }

    auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError("unexpected end of file", line_no + 1);
        ++line_no;
    };

    MultiviewDataset d;
    d.total_count = n;
    d.labelled_count = l;
    for (long long v = 0; v < n_views; ++v) {
        ViewMatrix vm;
        vm.view_id = static_cast<int>(v);
        const Index p = dims[static_cast<std::size_t>(v)];
        if (p < 1) throw ParseError("malformed header: view dimensions must be positive", 1);
        vm.values.resize(p, n);
        for (Index i = 0; i < p; ++i) {
            next_line();
            detail::parse_row(line, line_no, n, vm.values.data() + i, vm.values.rows());
        }
        d.views.push_back(std::move(vm));
    }
    d.labels.resize(pc, l);
    for (Index c = 0; c < pc; ++c) {
        next_line();
        detail::parse_row(line, line_no, l, d.labels.data() + c, d.labels.rows());
        for (Index j = 0; j < l; ++j) {
            const double y = d.labels(c, j);
            if (y != 0.0 && y != 1.0) {
                throw ParseError("label not in {0,1}", line_no, static_cast<std::size_t>(j + 1));
            }
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            throw ParseError("dimension mismatch: trailing data after the label block", line_no);
        }
    }
    d.validate();
    return d;
}

MultiviewDataset load_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

void write_dataset(const MultiviewDataset& d, std::ostream& out)
{
    d.validate();
    out << "MVDS v1 V=" << d.num_views() << " N=" << d.total_count << " l=" << d.labelled_count
        << " Pc=" << d.num_classes() << " P=";
    for (Index v = 0; v < d.num_views(); ++v) {
        if (v > 0) out << ',';
        out << d.views[static_cast<std::size_t>(v)].values.rows();
    }
    out << '\n';
    for (const auto& v : d.views) write_rows(out, v.values);
    write_rows(out, d.labels);
}

void save_dataset(const MultiviewDataset& d, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_dataset(d, out);
    if (!out) throw Error("write to '" + path + "' failed");
}

} // namespace mhdsc
