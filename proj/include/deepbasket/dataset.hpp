#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepbasket/basket.hpp"
#include "deepbasket/param_sampler.hpp"
#include "deepbasket/types.hpp"

namespace deepbasket {

// On-disk layout (little-endian):
//   header, 64 bytes:
//     char[8] magic "DBSKDATA" | u32 version | u32 n_assets | u32 record_bytes |
//     u32 label_paths | u64 count | u64 seed | i64 created_unix | f64 strike |
//     u32 input_width | u32 flags
//   count records of record_bytes(n) bytes:
//     f64 inputs[input_width] | f64 label | f64 label_std_error |
//     u32 label_paths | u64 seed
// Inputs are ordered forwards, vols, upper-triangle correlations (row-major),
// maturity_days; the order is fixed for format version 1.
inline constexpr std::array<char, 8> kDatasetMagic{'D', 'B', 'S', 'K', 'D', 'A', 'T', 'A'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 64;

constexpr std::size_t record_bytes(int n_assets) noexcept {
    return static_cast<std::size_t>(input_width(n_assets)) * 8 + 8 + 8 + 4 + 8;
}

enum DatasetFlags : std::uint32_t {
    kFlagAntithetic = 1u << 0,
    kFlagZeroValueRejected = 1u << 1,
};

struct Sample {
    std::vector<double> inputs;
    double label = 0.0;
    double label_std_error = 0.0;
    std::uint32_t label_paths = 0;
    std::uint64_t seed = 0;
};

struct DatasetHeader {
    std::uint32_t version = kDatasetVersion;
    std::uint32_t n_assets = 6;
    std::uint64_t count = 0;
    std::uint32_t label_paths = 0;
    std::uint64_t seed = 0;
    std::int64_t created_unix = 0;
    double strike = kDefaultStrike;
    std::uint32_t flags = 0;

    bool operator==(const DatasetHeader&) const = default;
};

// Column-oriented in-memory collection of samples.
class Dataset {
public:
    explicit Dataset(int n_assets = 6, double strike = kDefaultStrike);

    int n_assets() const noexcept { return n_assets_; }
    int width() const noexcept { return width_; }
    double strike() const noexcept { return strike_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    void reserve(std::size_t n);
    void push_back(const Sample& s);
    Sample sample(std::size_t i) const;

    std::span<const double> inputs(std::size_t i) const;
    double label(std::size_t i) const { return labels_[i]; }

    // All inputs as an m x width row-major view.
    Eigen::Map<const InputBatch> input_matrix() const;
    const std::vector<double>& labels() const noexcept { return labels_; }
    const std::vector<double>& label_std_errors() const noexcept { return std_errors_; }
    const std::vector<std::uint32_t>& label_paths() const noexcept { return paths_; }
    const std::vector<std::uint64_t>& seeds() const noexcept { return seeds_; }

    Dataset subset(std::span<const std::size_t> indices) const;
    Dataset head(std::size_t n) const;

    bool operator==(const Dataset&) const = default;

private:
    int n_assets_;
    int width_;
    double strike_;
    std::vector<double> inputs_;
    std::vector<double> labels_;
    std::vector<double> std_errors_;
    std::vector<std::uint32_t> paths_;
    std::vector<std::uint64_t> seeds_;
};

struct DatasetFile {
    DatasetHeader header;
    Dataset data;
};

struct GenerateOptions {
    std::uint64_t count = 1000;
    std::uint32_t label_paths = 1000;
    int workers = 0;
    bool antithetic = false;
    // Skip candidates whose MC value is exactly zero (off by default).
    bool reject_zero_value = false;
    // Stored verbatim in the header; keep fixed for byte-identical output.
    std::int64_t created_unix = 0;
};

// MC label stream for the original dataset labels. Relabel with any other
// stream to get noise independent of the stored labels.
inline constexpr std::uint64_t kLabelStream = 1;

std::uint64_t label_seed(std::uint64_t sample_seed, std::uint64_t stream) noexcept;

// Generates `count` samples, writing records in index order; the bytes do not
// depend on the worker count. Partial files are removed on failure.
DatasetHeader generate(const SamplingPlan& plan, const GenerateOptions& opts, const std::filesystem::path& out);
DatasetFile generate_in_memory(const SamplingPlan& plan, const GenerateOptions& opts);

// Replaces every label with a fresh MC value (`paths` paths, substream
// `stream` of each sample seed).
Dataset relabel(const Dataset& data, std::uint32_t paths, std::uint64_t stream, int workers = 0);

void write_dataset(const std::filesystem::path& path, const DatasetHeader& header, const Dataset& data);
std::vector<unsigned char> encode_dataset(const DatasetHeader& header, const Dataset& data);
DatasetFile read_dataset(const std::filesystem::path& path);
DatasetFile decode_dataset(std::span<const unsigned char> bytes);
DatasetHeader read_dataset_header(const std::filesystem::path& path);

struct SplitSpec {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> dev;
    std::vector<std::size_t> test;
};

struct Splits {
    Dataset train;
    Dataset dev;
    Dataset test;
};

// Largest-remainder apportionment of n items to the three fractions.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
Splits split(const Dataset& data, const SplitSpec& spec);
Splits split(const std::filesystem::path& file, const SplitSpec& spec);

struct Minibatch {
    std::uint64_t epoch = 0;
    std::size_t batch_in_epoch = 0;
    std::vector<std::size_t> indices;
    InputBatch inputs;
    Eigen::VectorXd labels;
};

// Endless epoch-wise shuffled mini-batches. Each epoch is a fresh permutation
// seeded by (shuffle_seed, epoch); the last batch of an epoch may be short.
class MinibatchStream {
public:
    MinibatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t shuffle_seed,
                    std::uint64_t first_epoch = 0);

    const Minibatch& next();
    // Advances past n batches without gathering them.
    void skip(std::uint64_t n);
    std::uint64_t epoch() const noexcept { return epoch_; }
    std::size_t batches_per_epoch() const noexcept;
    std::span<const std::size_t> epoch_order() const noexcept { return order_; }

private:
    void reshuffle();

    const Dataset& data_;
    std::size_t batch_size_;
    std::uint64_t shuffle_seed_;
    std::uint64_t epoch_;
    std::size_t cursor_ = 0;
    std::size_t batch_in_epoch_ = 0;
    std::vector<std::size_t> order_;
    Minibatch current_;
};

// Scaled-down training sets that share a total budget of 1e9 MC paths:
// from many noisy labels to few clean ones.
struct DatasetPreset {
    std::string_view name;
    std::uint64_t count;
    std::uint32_t label_paths;
};

inline constexpr std::array<DatasetPreset, 3> kDatasetPresets{{
    {"A'", 20'000, 50'000},
    {"B'", 200'000, 5'000},
    {"C'", 2'000'000, 500},
}};

std::optional<DatasetPreset> find_preset(std::string_view name);

}  // namespace deepbasket
