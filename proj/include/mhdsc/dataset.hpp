#pragma once

#include "mhdsc/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mhdsc {

/// One feature view: P_v rows (feature dimension) by N columns (samples).
struct ViewMatrix
{
    Matrix values;
    int view_id = 0;
};

/// Multiview data with a labelled prefix.
///
/// Columns 0..l-1 of every view are the labelled samples and line up with the
/// columns of `labels` (P_c x l, 0/1 entries); columns l..N-1 are unlabelled.
struct MultiviewDataset
{
    std::vector<ViewMatrix> views;
    Matrix labels;
    Index labelled_count = 0;
    Index total_count = 0;

    Index num_views() const { return static_cast<Index>(views.size()); }
    Index num_classes() const { return labels.rows(); }
    Index unlabelled_count() const { return total_count - labelled_count; }

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;
};

enum class Manifold { none, grid2d, swiss_roll };

struct SynthSpec
{
    int views = 3;
    std::vector<Index> dims{8, 8, 8};   // P_v per view; a single entry is broadcast
    Index classes = 4;
    Index samples = 120;
    Index atoms = 10;                   // ground-truth dictionary size
    Index sparsity = 2;                 // nonzeros per code column
    double noise_sigma = 0.0;
    Manifold manifold = Manifold::none;
    std::uint64_t seed = 0;

    void validate() const;
    Index dim(int v) const { return dims.size() == 1 ? dims[0] : dims[static_cast<std::size_t>(v)]; }
};

struct GroundTruth
{
    std::vector<Matrix> dictionaries;   // D_true per view, unit-norm columns
    Matrix codes;                       // W_true, atoms x N
    Matrix label_map;                   // classes x atoms
    Vector label_threshold;             // per-class threshold on label_map * W_true
    Matrix manifold_coords;             // N x intrinsic dim (empty for Manifold::none)
    Matrix embedding;                   // atoms x (1 + ambient): offset then orthonormal directions
};

struct SynthResult
{
    MultiviewDataset data;
    GroundTruth truth;
};

/// Draws a planted multiview dataset X^(v) = D_true^(v) W_true + noise with
/// every sample labelled. Deterministic for a fixed seed.
///
/// For grid2d and swiss_roll the code columns are an isometric embedding of
/// the manifold sample into a shared support of max(sparsity, ambient)
/// atoms, where ambient is 2 for the grid and 3 for the roll.
SynthResult synth_multiview(const SynthSpec& spec);

/// Encodes fresh samples drawn from an existing ground truth (same dictionaries
/// and label map, new codes). Used to make held-out test sets.
SynthResult synth_from_truth(const SynthSpec& spec, const GroundTruth& truth, Index samples,
                             std::uint64_t seed);

enum class Normalization { unit, zscore, none };

Normalization parse_normalization(const std::string& name);

/// Rescales every sample column of every view to unit Euclidean norm. Zero
/// columns are left untouched.
MultiviewDataset normalize_views(const MultiviewDataset& d);

/// Per-feature standardisation (zero mean, unit variance per row of each view);
/// constant rows are only centred.
MultiviewDataset zscore_views(const MultiviewDataset& d);

MultiviewDataset apply_normalization(const MultiviewDataset& d, Normalization how);

/// Draws floor(fraction * N) samples from the currently labelled block and moves
/// them to the front; all other samples become unlabelled.
MultiviewDataset split_labelled(const MultiviewDataset& d, double fraction, std::uint64_t seed);

MultiviewDataset load_dataset(const std::string& path);
MultiviewDataset read_dataset(std::istream& in);
void save_dataset(const MultiviewDataset& d, const std::string& path);
void write_dataset(const MultiviewDataset& d, std::ostream& out);

/// Keeps only the listed feature views (labels untouched). View ids are preserved.
MultiviewDataset select_views(const MultiviewDataset& d, const std::vector<int>& keep);

/// Stacks all feature views into one view (feature concatenation baseline).
MultiviewDataset concatenate_views(const MultiviewDataset& d);

} // namespace mhdsc
