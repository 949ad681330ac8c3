#include "deepbasket/checkpoint.hpp"

#include <array>
#include <string>

#include "deepbasket/binary_io.hpp"
#include "deepbasket/errors.hpp"

namespace deepbasket {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'B', 'S', 'K', 'M', 'L', 'P', '1'};

void put_matrix(ByteWriter& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.put<double>(m(i, j));
    }
}

void put_vector(ByteWriter& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out.put<double>(v(i));
}

void get_matrix(ByteReader& in, Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = in.get<double>();
    }
}

void get_vector(ByteReader& in, Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = in.get<double>();
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
    const Mlp& model = ckpt.model;
    ByteWriter out;
    out.put_bytes(std::string_view(kMagic.data(), kMagic.size()));
    out.put<std::uint32_t>(kCheckpointVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(model.hidden_activation()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(model.layer_dims().size()));
    for (int d : model.layer_dims()) out.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    out.put<std::uint64_t>(ckpt.iteration);
    out.put<std::uint32_t>(ckpt.optimizer ? 1u : 0u);
    out.put<std::uint32_t>(0u);

    const auto& norm = model.normalization();
    put_vector(out, norm.input_shift);
    put_vector(out, norm.input_scale);
    out.put<double>(norm.output_shift);
    out.put<double>(norm.output_scale);
    for (const auto& layer : model.layers()) {
        put_matrix(out, layer.weights);
        put_vector(out, layer.bias);
    }
    if (ckpt.optimizer) {
        const AdamState& s = *ckpt.optimizer;
        if (!s.matches(model)) throw ShapeError("checkpoint: optimiser state does not match the model");
        out.put<std::uint64_t>(s.step);
        out.put<double>(s.config.learning_rate);
        out.put<double>(s.config.beta1);
        out.put<double>(s.config.beta2);
        out.put<double>(s.config.epsilon);
        for (std::size_t l = 0; l < s.m_weights.size(); ++l) {
            put_matrix(out, s.m_weights[l]);
            put_matrix(out, s.v_weights[l]);
            put_vector(out, s.m_biases[l]);
            put_vector(out, s.v_biases[l]);
        }
    }
    return out.bytes();
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
    ByteReader in(bytes);
    const std::string magic = in.get_bytes(kMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("bad checkpoint magic", 0);
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 8);
    const std::uint64_t act_offset = in.offset();
    const auto act = in.get<std::uint32_t>();
    if (act > static_cast<std::uint32_t>(Activation::Linear)) throw FormatError("unknown activation code", act_offset);
    const std::uint64_t dims_offset = in.offset();
    const auto n_dims = in.get<std::uint32_t>();
    if (n_dims < 2 || n_dims > 1024) throw FormatError("implausible layer count", dims_offset);
    std::vector<int> dims(n_dims);
    for (auto& d : dims) {
        const auto v = in.get<std::uint32_t>();
        if (v < 1 || v > (1u << 20)) throw FormatError("implausible layer width", in.offset() - 4);
        d = static_cast<int>(v);
    }
    if (dims.back() != 1) throw FormatError("output layer width must be 1", in.offset() - 4);

    Checkpoint ckpt{Mlp(dims, static_cast<Activation>(act)), 0, std::nullopt};
    ckpt.iteration = in.get<std::uint64_t>();
    const auto has_optimizer = in.get<std::uint32_t>();
    in.get<std::uint32_t>();

    auto& norm = ckpt.model.normalization();
    get_vector(in, norm.input_shift);
    get_vector(in, norm.input_scale);
    norm.output_shift = in.get<double>();
    norm.output_scale = in.get<double>();
    for (auto& layer : ckpt.model.layers()) {
        get_matrix(in, layer.weights);
        get_vector(in, layer.bias);
    }
    if (has_optimizer != 0) {
        AdamState s = AdamState::for_model(ckpt.model);
        s.step = in.get<std::uint64_t>();
        s.config.learning_rate = in.get<double>();
        s.config.beta1 = in.get<double>();
        s.config.beta2 = in.get<double>();
        s.config.epsilon = in.get<double>();
        for (std::size_t l = 0; l < s.m_weights.size(); ++l) {
            get_matrix(in, s.m_weights[l]);
            get_matrix(in, s.v_weights[l]);
            get_vector(in, s.m_biases[l]);
            get_vector(in, s.v_biases[l]);
        }
        ckpt.optimizer = std::move(s);
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes after checkpoint payload", in.offset());
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomically(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace deepbasket
