#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "netsight/error.hpp"
#include "netsight/nn.hpp"
#include "netsight/pseudo_label.hpp"

namespace netsight {

// Layout: 8-byte magic, u32 version, u64 header length, JSON header, then the
// float64 payload in the order the header describes. Integers and doubles are
// little-endian.
inline constexpr char kCheckpointMagic[8] = {'N', 'S', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Checkpoint {
    AutoencoderModel model;
    std::optional<LabelerState> labeler;

    bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline nlohmann::json layers_json(const std::vector<DenseLayer>& layers) {
    auto arr = nlohmann::json::array();
    for (const auto& l : layers) {
        arr.push_back({{"in", l.in_dim()}, {"out", l.out_dim()}, {"activation", to_string(l.activation)}});
    }
    return arr;
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw DataError("checkpoint: unknown activation '" + s + "'");
}

template <class T>
void put(std::string& out, const T& v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T take(std::string_view& in, const char* what) {
    if (in.size() < sizeof(T)) throw DataError(std::string("checkpoint truncated reading ") + what);
    T v;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return v;
}

inline void put_doubles(std::string& out, std::span<const double> v) {
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

inline void take_doubles(std::string_view& in, std::span<double> v) {
    const std::size_t bytes = v.size() * sizeof(double);
    if (in.size() < bytes) throw DataError("checkpoint payload truncated");
    std::memcpy(v.data(), in.data(), bytes);
    in.remove_prefix(bytes);
}

inline void put_component(std::string& out, const ComponentDistributions& d) {
    put_doubles(out, d.prototype);
    const double scalars[] = {d.normal.mu, d.normal.sigma, d.abnormal.mu, d.abnormal.sigma, d.kl_score};
    put_doubles(out, scalars);
}

inline void take_component(std::string_view& in, ComponentDistributions& d, std::size_t dim) {
    d.prototype.assign(dim, 0.0);
    take_doubles(in, d.prototype);
    double s[5];
    take_doubles(in, s);
    d.normal = {s[0], s[1]};
    d.abnormal = {s[2], s[3]};
    d.kl_score = s[4];
}

}  // namespace detail

[[nodiscard]] inline std::string serialize_checkpoint(const Checkpoint& ck) {
    ck.model.validate();
    nlohmann::json h;
    h["format"] = "netsight-checkpoint";
    h["version"] = kCheckpointVersion;
    h["dtype"] = "float64-le";
    h["input_dim"] = ck.model.input_dim();
    h["latent_dim"] = ck.model.latent_dim();
    h["encoder"] = detail::layers_json(ck.model.encoder);
    h["decoder"] = detail::layers_json(ck.model.decoder);
    if (ck.labeler) {
        h["labeler"] = {{"selected", to_string(ck.labeler->selected)},
                        {"encoder_prototype_dim", ck.labeler->encoder.prototype.size()},
                        {"decoder_prototype_dim", ck.labeler->decoder.prototype.size()}};
    } else {
        h["labeler"] = nullptr;
    }
    std::string payload;
    for (const auto* stack : {&ck.model.encoder, &ck.model.decoder}) {
        for (const auto& l : *stack) {
            detail::put_doubles(payload, l.weight.data);
            detail::put_doubles(payload, l.bias);
        }
    }
    if (ck.labeler) {
        detail::put_component(payload, ck.labeler->encoder);
        detail::put_component(payload, ck.labeler->decoder);
        const double prior = ck.labeler->prior_normal;
        detail::put_doubles(payload, std::span(&prior, 1));
    }
    h["payload_doubles"] = payload.size() / sizeof(double);

    const std::string header = h.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put(out, kCheckpointVersion);
    detail::put(out, static_cast<std::uint64_t>(header.size()));
    out += header;
    out += payload;
    return out;
}

[[nodiscard]] inline Checkpoint deserialize_checkpoint(std::string_view in) {
    if (in.size() < sizeof kCheckpointMagic || std::memcmp(in.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
        throw DataError("not a netsight checkpoint (bad magic)");
    }
    in.remove_prefix(sizeof kCheckpointMagic);
    const auto version = detail::take<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto hlen = detail::take<std::uint64_t>(in, "header length");
    if (in.size() < hlen) throw DataError("checkpoint header truncated");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(in.substr(0, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    in.remove_prefix(hlen);

    Checkpoint ck;
    try {
        auto read_stack = [&](const nlohmann::json& arr) {
            std::vector<DenseLayer> layers;
            for (const auto& j : arr) {
                const auto r = j.at("out").get<std::size_t>();
                const auto c = j.at("in").get<std::size_t>();
                layers.push_back({Matrix(r, c), Vec(r), detail::activation_from_string(j.at("activation"))});
            }
            return layers;
        };
        ck.model.encoder = read_stack(h.at("encoder"));
        ck.model.decoder = read_stack(h.at("decoder"));
        const std::size_t expected = h.at("payload_doubles").get<std::size_t>();
        if (in.size() != expected * sizeof(double)) throw DataError("checkpoint payload size mismatch");
        for (auto* stack : {&ck.model.encoder, &ck.model.decoder}) {
            for (auto& l : *stack) {
                detail::take_doubles(in, l.weight.data);
                detail::take_doubles(in, l.bias);
            }
        }
        if (!h.at("labeler").is_null()) {
            const auto& lj = h.at("labeler");
            LabelerState st;
            const auto sel = lj.at("selected").get<std::string>();
            if (sel != "en" && sel != "de") throw DataError("checkpoint: bad selected component '" + sel + "'");
            st.selected = sel == "en" ? Component::encoder : Component::decoder;
            detail::take_component(in, st.encoder, lj.at("encoder_prototype_dim").get<std::size_t>());
            detail::take_component(in, st.decoder, lj.at("decoder_prototype_dim").get<std::size_t>());
            double prior = 0.0;
            detail::take_doubles(in, std::span(&prior, 1));
            st.prior_normal = prior;
            ck.labeler = std::move(st);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header is malformed: ") + e.what());
    }
    if (!in.empty()) throw DataError("checkpoint has trailing bytes");
    ck.model.validate();
    return ck;
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw DataError("cannot write " + path.string());
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw DataError("write failed for " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

[[nodiscard]] inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_checkpoint(ck));
}

[[nodiscard]] inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path));
}

}  // namespace netsight
