#include "deepbasket/dataset.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "deepbasket/binary_io.hpp"
#include "deepbasket/errors.hpp"
#include "deepbasket/mc_engine.hpp"
#include "deepbasket/parallel.hpp"
#include "deepbasket/random.hpp"

namespace deepbasket {

namespace {

constexpr std::size_t kGenerateBlock = 256;
constexpr std::uint64_t kMaxRejectedCandidates = 1u << 20;

void check_label(double label, double std_error, std::uint64_t offset) {
    if (!std::isfinite(label) || label < 0.0) throw FormatError("label is negative or not finite", offset);
    if (!std::isfinite(std_error) || std_error < 0.0) {
        throw FormatError("label std error is negative or not finite", offset);
    }
}

void encode_header(ByteWriter& out, const DatasetHeader& h) {
    out.put_bytes(std::string_view(kDatasetMagic.data(), kDatasetMagic.size()));
    out.put<std::uint32_t>(h.version);
    out.put<std::uint32_t>(h.n_assets);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(record_bytes(static_cast<int>(h.n_assets))));
    out.put<std::uint32_t>(h.label_paths);
    out.put<std::uint64_t>(h.count);
    out.put<std::uint64_t>(h.seed);
    out.put<std::int64_t>(h.created_unix);
    out.put<double>(h.strike);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(input_width(static_cast<int>(h.n_assets))));
    out.put<std::uint32_t>(h.flags);
}

void encode_record(ByteWriter& out, const Dataset& d, std::size_t i) {
    out.put_all(d.inputs(i));
    out.put<double>(d.labels()[i]);
    out.put<double>(d.label_std_errors()[i]);
    out.put<std::uint32_t>(d.label_paths()[i]);
    out.put<std::uint64_t>(d.seeds()[i]);
}

DatasetHeader decode_header(ByteReader& in, std::uint64_t file_size) {
    if (in.remaining() < kDatasetHeaderBytes) {
        throw FormatError("file too short for a dataset header", in.offset() + in.remaining());
    }
    const std::string magic = in.get_bytes(kDatasetMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kDatasetMagic.begin())) {
        throw FormatError("bad dataset magic", 0);
    }
    DatasetHeader h;
    h.version = in.get<std::uint32_t>();
    if (h.version != kDatasetVersion) {
        throw FormatError("unsupported dataset version " + std::to_string(h.version), 8);
    }
    h.n_assets = in.get<std::uint32_t>();
    if (h.n_assets < 1 || h.n_assets > 64) throw FormatError("invalid n_assets", 12);
    const auto rec = in.get<std::uint32_t>();
    if (rec != record_bytes(static_cast<int>(h.n_assets))) throw FormatError("record size mismatch", 16);
    h.label_paths = in.get<std::uint32_t>();
    h.count = in.get<std::uint64_t>();
    h.seed = in.get<std::uint64_t>();
    h.created_unix = in.get<std::int64_t>();
    h.strike = in.get<double>();
    const auto width = in.get<std::uint32_t>();
    if (width != static_cast<std::uint32_t>(input_width(static_cast<int>(h.n_assets)))) {
        throw FormatError("input width mismatch", 56);
    }
    h.flags = in.get<std::uint32_t>();
    if (!(h.strike > 0.0)) throw FormatError("strike must be positive", 48);

    const std::uint64_t expected = kDatasetHeaderBytes + h.count * rec;
    if (file_size != expected) {
        throw FormatError("payload size does not match header count " + std::to_string(h.count) + " (expected " +
                              std::to_string(expected) + " bytes, file has " + std::to_string(file_size) + ")",
                          std::min(file_size, expected));
    }
    return h;
}

Sample make_sample(const SamplingPlan& plan, std::uint64_t index, const GenerateOptions& opts) {
    const std::uint64_t seed = sample_seed(plan, index);
    SamplerRng rng(seed);
    const BasketSpec spec = sample_spec(plan, rng);
    McConfig mc;
    mc.num_paths = opts.label_paths;
    mc.seed = label_seed(seed, kLabelStream);
    mc.antithetic = opts.antithetic;
    const McResult r = price(spec, mc, 1);
    Sample s;
    s.inputs = spec.to_inputs();
    s.label = r.value;
    s.label_std_error = r.std_error;
    s.label_paths = opts.label_paths;
    s.seed = seed;
    return s;
}

// Produces accepted samples in candidate order and hands them to `sink` in
// blocks. Candidates inside a block are priced in parallel.
void validate_options(const GenerateOptions& opts) {
    if (opts.count < 1) throw ValidationError("generate: count must be >= 1");
    if (opts.label_paths < 1) throw ValidationError("generate: label_paths must be >= 1");
}

void produce(const SamplingPlan& plan, const GenerateOptions& opts, const std::function<void(const Dataset&)>& sink) {
    plan.validate();
    validate_options(opts);
    const int threads = opts.workers > 0 ? opts.workers : omp_get_max_threads();

    std::uint64_t accepted = 0;
    std::uint64_t next_candidate = 0;
    std::vector<Sample> block(kGenerateBlock);
    while (accepted < opts.count) {
        const std::uint64_t want = opts.reject_zero_value ? kGenerateBlock
                                                          : std::min<std::uint64_t>(kGenerateBlock, opts.count - accepted);
        const auto n = static_cast<std::int64_t>(want);
        ParallelErrors errors;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
        for (std::int64_t k = 0; k < n; ++k) {
            errors.run([&] {
                block[static_cast<std::size_t>(k)] =
                    make_sample(plan, next_candidate + static_cast<std::uint64_t>(k), opts);
            });
        }
        errors.rethrow();
        next_candidate += want;
        if (accepted == 0 && next_candidate >= kMaxRejectedCandidates) {
            throw ValidationError("generate: no non-zero label among the first " + std::to_string(next_candidate) +
                                  " candidates");
        }

        Dataset out(plan.n_assets, plan.strike);
        for (std::int64_t k = 0; k < n && accepted < opts.count; ++k) {
            const Sample& s = block[static_cast<std::size_t>(k)];
            if (opts.reject_zero_value && s.label == 0.0) continue;
            out.push_back(s);
            ++accepted;
        }
        if (!out.empty()) sink(out);
    }
}

DatasetHeader header_for(const SamplingPlan& plan, const GenerateOptions& opts) {
    DatasetHeader h;
    h.n_assets = static_cast<std::uint32_t>(plan.n_assets);
    h.count = opts.count;
    h.label_paths = opts.label_paths;
    h.seed = plan.seed;
    h.created_unix = opts.created_unix;
    h.strike = plan.strike;
    h.flags = (opts.antithetic ? kFlagAntithetic : 0u) | (opts.reject_zero_value ? kFlagZeroValueRejected : 0u);
    return h;
}

}  // namespace

Dataset::Dataset(int n_assets, double strike) : n_assets_(n_assets), width_(input_width(n_assets)), strike_(strike) {
    if (n_assets < 1) throw ValidationError("dataset needs n_assets >= 1");
}

void Dataset::reserve(std::size_t n) {
    inputs_.reserve(n * static_cast<std::size_t>(width_));
    labels_.reserve(n);
    std_errors_.reserve(n);
    paths_.reserve(n);
    seeds_.reserve(n);
}

void Dataset::push_back(const Sample& s) {
    if (s.inputs.size() != static_cast<std::size_t>(width_)) {
        throw ShapeError("sample has " + std::to_string(s.inputs.size()) + " inputs, dataset width is " +
                         std::to_string(width_));
    }
    if (!std::isfinite(s.label) || s.label < 0.0) throw ValidationError("sample label must be finite and >= 0");
    inputs_.insert(inputs_.end(), s.inputs.begin(), s.inputs.end());
    labels_.push_back(s.label);
    std_errors_.push_back(s.label_std_error);
    paths_.push_back(s.label_paths);
    seeds_.push_back(s.seed);
}

Sample Dataset::sample(std::size_t i) const {
    const auto in = inputs(i);
    return Sample{{in.begin(), in.end()}, labels_[i], std_errors_[i], paths_[i], seeds_[i]};
}

std::span<const double> Dataset::inputs(std::size_t i) const {
    return {inputs_.data() + i * static_cast<std::size_t>(width_), static_cast<std::size_t>(width_)};
}

Eigen::Map<const InputBatch> Dataset::input_matrix() const {
    return {inputs_.data(), static_cast<Eigen::Index>(size()), width_};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out(n_assets_, strike_);
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw ShapeError("subset index out of range");
        const auto in = inputs(i);
        out.inputs_.insert(out.inputs_.end(), in.begin(), in.end());
        out.labels_.push_back(labels_[i]);
        out.std_errors_.push_back(std_errors_[i]);
        out.paths_.push_back(paths_[i]);
        out.seeds_.push_back(seeds_[i]);
    }
    return out;
}

Dataset Dataset::head(std::size_t n) const {
    std::vector<std::size_t> idx(std::min(n, size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return subset(idx);
}

std::uint64_t label_seed(std::uint64_t seed, std::uint64_t stream) noexcept { return derive_seed(seed, 0, stream); }

DatasetHeader generate(const SamplingPlan& plan, const GenerateOptions& opts, const std::filesystem::path& out) {
    plan.validate();
    validate_options(opts);
    const DatasetHeader header = header_for(plan, opts);
    AtomicFileWriter file(out);
    ByteWriter buf;
    encode_header(buf, header);
    file.write(buf.bytes());
    produce(plan, opts, [&](const Dataset& block) {
        buf.clear();
        for (std::size_t i = 0; i < block.size(); ++i) encode_record(buf, block, i);
        file.write(buf.bytes());
    });
    file.commit();
    return header;
}

DatasetFile generate_in_memory(const SamplingPlan& plan, const GenerateOptions& opts) {
    DatasetFile f{header_for(plan, opts), Dataset(plan.n_assets, plan.strike)};
    f.data.reserve(opts.count);
    produce(plan, opts, [&](const Dataset& block) {
        for (std::size_t i = 0; i < block.size(); ++i) f.data.push_back(block.sample(i));
    });
    return f;
}

Dataset relabel(const Dataset& data, std::uint32_t paths, std::uint64_t stream, int workers) {
    if (paths < 1) throw ValidationError("relabel: paths must be >= 1");
    Dataset out = data;
    const int threads = workers > 0 ? workers : omp_get_max_threads();
    const auto n = static_cast<std::int64_t>(data.size());
    std::vector<McResult> results(data.size());
    ParallelErrors errors;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        errors.run([&] {
            const auto k = static_cast<std::size_t>(i);
            const BasketSpec spec = BasketSpec::from_inputs(data.n_assets(), data.inputs(k), data.strike());
            McConfig mc;
            mc.num_paths = paths;
            mc.seed = label_seed(data.seeds()[k], stream);
            results[k] = price(spec, mc, 1);
        });
    }
    errors.rethrow();
    Dataset fresh(data.n_assets(), data.strike());
    fresh.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        Sample s = data.sample(i);
        s.label = results[i].value;
        s.label_std_error = results[i].std_error;
        s.label_paths = paths;
        fresh.push_back(s);
    }
    return fresh;
}

std::vector<unsigned char> encode_dataset(const DatasetHeader& header, const Dataset& data) {
    if (header.count != data.size()) throw ValidationError("header count differs from dataset size");
    if (static_cast<int>(header.n_assets) != data.n_assets()) throw ValidationError("header n_assets mismatch");
    ByteWriter out;
    encode_header(out, header);
    for (std::size_t i = 0; i < data.size(); ++i) encode_record(out, data, i);
    return out.bytes();
}

void write_dataset(const std::filesystem::path& path, const DatasetHeader& header, const Dataset& data) {
    write_file_atomically(path, encode_dataset(header, data));
}

DatasetFile decode_dataset(std::span<const unsigned char> bytes) {
    ByteReader in(bytes);
    const DatasetHeader h = decode_header(in, bytes.size());
    const int n = static_cast<int>(h.n_assets);
    DatasetFile f{h, Dataset(n, h.strike)};
    f.data.reserve(h.count);
    Sample s;
    s.inputs.resize(static_cast<std::size_t>(input_width(n)));
    for (std::uint64_t i = 0; i < h.count; ++i) {
        const std::uint64_t record_offset = in.offset();
        for (auto& x : s.inputs) x = in.get<double>();
        s.label = in.get<double>();
        s.label_std_error = in.get<double>();
        s.label_paths = in.get<std::uint32_t>();
        s.seed = in.get<std::uint64_t>();
        check_label(s.label, s.label_std_error, record_offset);
        f.data.push_back(s);
    }
    return f;
}

DatasetFile read_dataset(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file_bytes(path);
    return decode_dataset(bytes);
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
    const auto size = std::filesystem::file_size(path);
    std::vector<unsigned char> head(std::min<std::uintmax_t>(size, kDatasetHeaderBytes));
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (f == nullptr) throw IoError("cannot open " + path.string());
    const std::size_t got = std::fread(head.data(), 1, head.size(), f);
    std::fclose(f);
    head.resize(got);
    ByteReader in(head);
    return decode_header(in, size);
}

void SplitSpec::validate() const {
    for (double f : {train, dev, test}) {
        if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split fractions must lie in [0, 1]");
    }
    if (std::abs(train + dev + test - 1.0) > 1e-12) throw ValidationError("split fractions must sum to 1");
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    const std::array<double, 3> fractions{spec.train, spec.dev, spec.test};
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = fractions[k] * static_cast<double>(n);
        sizes[k] = static_cast<std::size_t>(std::floor(exact));
        remainders[k] = exact - static_cast<double>(sizes[k]);
        assigned += sizes[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
        ++sizes[order[k]];
        ++assigned;
    }
    return sizes;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    const auto sizes = split_sizes(n, spec);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(spec.seed, 0, 7));
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
    out.dev.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
                   perm.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), perm.end());
    // Keep file order inside each split.
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.dev.begin(), out.dev.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

Splits split(const Dataset& data, const SplitSpec& spec) {
    const SplitIndices idx = split_indices(data.size(), spec);
    return Splits{data.subset(idx.train), data.subset(idx.dev), data.subset(idx.test)};
}

Splits split(const std::filesystem::path& file, const SplitSpec& spec) {
    spec.validate();
    return split(read_dataset(file).data, spec);
}

MinibatchStream::MinibatchStream(const Dataset& data, std::size_t batch_size, std::uint64_t shuffle_seed,
                                 std::uint64_t first_epoch)
    : data_(data), batch_size_(batch_size), shuffle_seed_(shuffle_seed), epoch_(first_epoch) {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (data.empty()) throw ValidationError("cannot stream mini-batches from an empty dataset");
    reshuffle();
}

std::size_t MinibatchStream::batches_per_epoch() const noexcept {
    return (data_.size() + batch_size_ - 1) / batch_size_;
}

void MinibatchStream::reshuffle() {
    order_.resize(data_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(shuffle_seed_, epoch_, 3));
    std::shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
    batch_in_epoch_ = 0;
}

const Minibatch& MinibatchStream::next() {
    if (cursor_ >= order_.size()) {
        ++epoch_;
        reshuffle();
    }
    const std::size_t n = std::min(batch_size_, order_.size() - cursor_);
    current_.epoch = epoch_;
    current_.batch_in_epoch = batch_in_epoch_++;
    current_.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                            order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + n));
    current_.inputs.resize(static_cast<Eigen::Index>(n), data_.width());
    current_.labels.resize(static_cast<Eigen::Index>(n));
    const auto all = data_.input_matrix();
    for (std::size_t r = 0; r < n; ++r) {
        const auto src = static_cast<Eigen::Index>(current_.indices[r]);
        current_.inputs.row(static_cast<Eigen::Index>(r)) = all.row(src);
        current_.labels(static_cast<Eigen::Index>(r)) = data_.label(current_.indices[r]);
    }
    cursor_ += n;
    return current_;
}

void MinibatchStream::skip(std::uint64_t n) {
    for (std::uint64_t k = 0; k < n; ++k) {
        if (cursor_ >= order_.size()) {
            ++epoch_;
            reshuffle();
        }
        cursor_ += std::min(batch_size_, order_.size() - cursor_);
        ++batch_in_epoch_;
    }
}

std::optional<DatasetPreset> find_preset(std::string_view name) {
    for (const auto& p : kDatasetPresets) {
        if (p.name == name) return p;
        // Accept the unprimed letter as an alias.
        if (name.size() == 1 && std::toupper(static_cast<unsigned char>(name.front())) == p.name.front()) return p;
    }
    return std::nullopt;
}

}  // namespace deepbasket
