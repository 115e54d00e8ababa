#include "plab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "plab/error.hpp"

namespace plab {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'A', 'B'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a64(const std::vector<char>& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<char>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

class Reader {
public:
    Reader(std::vector<char> bytes, std::string path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }

    std::string str(std::size_t len) {
        need(len);
        std::string s(bytes_.data() + pos_, len);
        pos_ += len;
        return s;
    }

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return bytes_.size(); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw Error("load: truncated file " + path_ + " (needed " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ")");
    }

    std::vector<char> bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace

void save_tensors(const NamedTensors& tensors, const std::filesystem::path& path) {
    std::vector<char> payload;
    put_u32(payload, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u32(payload, static_cast<std::uint32_t>(name.size()));
        payload.insert(payload.end(), name.begin(), name.end());
        put_u32(payload, static_cast<std::uint32_t>(t.rows));
        put_u32(payload, static_cast<std::uint32_t>(t.cols));
        for (double d : t.data) put_f64(payload, d);
    }

    std::vector<char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u64(out, fnv1a64(payload));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("save: cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("save: write failed for " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("load: cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 16) throw Error("load: " + path.string() + " is not a PLAB file (too short)");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw Error("load: " + path.string() + " is not a PLAB file (bad magic)");

    Reader r(std::move(bytes), path.string());
    r.str(4); // magic
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw Error("load: " + path.string() + ": unsupported version " + std::to_string(version));

    // Verify the trailing checksum over payload bytes before parsing records.
    const std::size_t payload_begin = r.pos();
    if (r.size() < payload_begin + 8) throw Error("load: " + path.string() + " has no checksum");
    const std::size_t payload_end = r.size() - 8;
    std::vector<char> payload(r.bytes().begin() + static_cast<std::ptrdiff_t>(payload_begin),
                              r.bytes().begin() + static_cast<std::ptrdiff_t>(payload_end));
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(
                      static_cast<std::uint8_t>(r.bytes()[payload_end + static_cast<std::size_t>(i)]))
                  << (8 * i);
    if (fnv1a64(payload) != stored)
        throw Error("load: " + path.string() + ": checksum mismatch");

    NamedTensors tensors;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        Tensor t(static_cast<int>(rows), static_cast<int>(cols));
        for (double& d : t.data) d = r.f64();
        tensors.emplace_back(std::move(name), std::move(t));
    }
    if (r.pos() != payload_end)
        throw Error("load: " + path.string() + ": trailing bytes after tensor records");
    return tensors;
}

void save_checkpoint(const DualEncoderParams& params, const std::filesystem::path& path) {
    NamedTensors tensors;
    const std::vector<std::string> names = param_names(params);
    const std::vector<const Tensor*> ptrs = param_tensors(params);
    for (std::size_t i = 0; i < names.size(); ++i) tensors.emplace_back(names[i], *ptrs[i]);
    save_tensors(tensors, path);
}

DualEncoderParams load_checkpoint(const std::filesystem::path& path) {
    const NamedTensors tensors = load_tensors(path);
    DualEncoderParams params;
    bool seen_log_tau = false;
    for (const auto& [name, t] : tensors) {
        if (name == "log_tau") {
            if (!t.is_scalar()) throw Error("load_checkpoint: log_tau must be 1x1 in " + path.string());
            params.log_tau = t;
            seen_log_tau = true;
            continue;
        }
        const auto dot1 = name.find('.');
        const auto dot2 = name.rfind('.');
        if (dot1 == std::string::npos || dot2 == dot1)
            throw Error("load_checkpoint: unexpected tensor name '" + name + "' in " + path.string());
        const std::string tower = name.substr(0, dot1);
        const int layer = std::stoi(name.substr(dot1 + 1, dot2 - dot1 - 1));
        const std::string kind = name.substr(dot2 + 1);
        auto& layers = (tower == "image") ? params.image_layers : params.text_layers;
        if (tower != "image" && tower != "text")
            throw Error("load_checkpoint: unexpected tower '" + tower + "' in " + path.string());
        if (layer < 0) throw Error("load_checkpoint: bad layer index in '" + name + "'");
        if (static_cast<std::size_t>(layer) >= layers.size())
            layers.resize(static_cast<std::size_t>(layer) + 1);
        if (kind == "weight")
            layers[static_cast<std::size_t>(layer)].weight = t;
        else if (kind == "bias")
            layers[static_cast<std::size_t>(layer)].bias = t;
        else
            throw Error("load_checkpoint: unexpected tensor kind '" + kind + "' in " + path.string());
    }
    if (!seen_log_tau) throw Error("load_checkpoint: missing log_tau in " + path.string());
    if (params.image_layers.empty() || params.text_layers.empty())
        throw Error("load_checkpoint: missing encoder layers in " + path.string());
    for (const auto& layers : {params.image_layers, params.text_layers})
        for (const auto& l : layers)
            if (l.weight.size() == 0 || l.bias.size() == 0)
                throw Error("load_checkpoint: incomplete layer records in " + path.string());
    return params;
}

void save_dataset(const PairedDataset& dataset, const std::filesystem::path& path) {
    NamedTensors tensors;
    tensors.emplace_back("images", dataset.images);
    tensors.emplace_back("texts", dataset.texts);
    Tensor labels(1, dataset.size());
    Tensor flags(1, dataset.size());
    for (int i = 0; i < dataset.size(); ++i) {
        labels.at(0, i) = dataset.true_labels[static_cast<std::size_t>(i)];
        flags.at(0, i) = dataset.poison_flags[static_cast<std::size_t>(i)];
    }
    tensors.emplace_back("true_labels", std::move(labels));
    tensors.emplace_back("poison_flags", std::move(flags));
    save_tensors(tensors, path);
}

PairedDataset load_dataset(const std::filesystem::path& path) {
    const NamedTensors tensors = load_tensors(path);
    PairedDataset ds;
    const Tensor* labels = nullptr;
    const Tensor* flags = nullptr;
    for (const auto& [name, t] : tensors) {
        if (name == "images")
            ds.images = t;
        else if (name == "texts")
            ds.texts = t;
        else if (name == "true_labels")
            labels = &t;
        else if (name == "poison_flags")
            flags = &t;
        else
            throw Error("load_dataset: unexpected tensor '" + name + "' in " + path.string());
    }
    if (!labels || !flags || ds.images.rows == 0)
        throw Error("load_dataset: missing records in " + path.string());
    if (labels->cols != ds.images.rows || flags->cols != ds.images.rows ||
        ds.texts.rows != ds.images.rows)
        throw Error("load_dataset: inconsistent row counts in " + path.string());
    ds.true_labels.resize(static_cast<std::size_t>(labels->cols));
    ds.poison_flags.resize(static_cast<std::size_t>(flags->cols));
    for (int i = 0; i < labels->cols; ++i) {
        ds.true_labels[static_cast<std::size_t>(i)] = static_cast<int>(labels->at(0, i));
        ds.poison_flags[static_cast<std::size_t>(i)] = flags->at(0, i) != 0.0 ? 1 : 0;
    }
    return ds;
}

} // namespace plab
