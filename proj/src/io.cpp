#include "stylet/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace stylet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

constexpr char kCkptMagic[8] = {'S', 'T', 'L', 'T', 'C', 'K', 'P', 'T'};
constexpr char kCodeMagic[8] = {'S', 'T', 'L', 'T', 'C', 'O', 'D', 'E'};
constexpr char kImgMagic[8] = {'S', 'T', 'L', 'T', 'I', 'M', 'G', 'S'};

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& f) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!f) throw std::runtime_error("file truncated");
    return v;
}

void put_doubles(std::ofstream& f, const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::ifstream& f, std::vector<double>& v) {
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!f) throw std::runtime_error("file truncated");
}

void put_string(std::ofstream& f, const std::string& s) {
    put<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& f) {
    std::uint32_t len = get<std::uint32_t>(f);
    std::string s(len, '\0');
    f.read(s.data(), len);
    if (!f) throw std::runtime_error("file truncated");
    return s;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    return f;
}

std::ifstream open_in(const std::string& path, const char magic[8]) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path + "'");
    char m[8];
    f.read(m, 8);
    if (!f || std::memcmp(m, magic, 8) != 0)
        throw std::runtime_error("'" + path + "' has wrong magic bytes for this format");
    return f;
}

}  // namespace

void save_checkpoint(const std::string& path, std::uint64_t config_hash, const ParamList& params,
                     const Adam* opt) {
    std::ofstream f = open_out(path);
    f.write(kCkptMagic, 8);
    put<std::uint32_t>(f, 1);
    put<std::uint64_t>(f, config_hash);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(params.size()));
    for (const NamedTensor& p : params) {
        put_string(f, p.name);
        put<std::uint32_t>(f, static_cast<std::uint32_t>(p.tensor.ndim()));
        for (std::size_t s : p.tensor.shape()) put<std::uint64_t>(f, s);
        put_doubles(f, p.tensor.values());
    }
    put<std::uint8_t>(f, opt ? 1 : 0);
    if (opt) {
        Adam& o = const_cast<Adam&>(*opt);
        put<std::int64_t>(f, o.t());
        for (const Adam::State& st : o.state()) {
            put_doubles(f, st.m);
            put_doubles(f, st.v);
        }
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream f = open_in(path, kCkptMagic);
    CheckpointData ck;
    ck.version = get<std::uint32_t>(f);
    if (ck.version != 1)
        throw std::runtime_error("checkpoint '" + path + "' has unsupported version " +
                                 std::to_string(ck.version));
    ck.config_hash = get<std::uint64_t>(f);
    std::uint32_t count = get<std::uint32_t>(f);
    ck.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(f);
        std::uint32_t ndim = get<std::uint32_t>(f);
        std::vector<std::size_t> shape(ndim);
        for (auto& s : shape) s = static_cast<std::size_t>(get<std::uint64_t>(f));
        Tensor t(shape);
        get_doubles(f, t.values());
        ck.tensors.push_back({std::move(name), std::move(t)});
    }
    ck.has_optimizer = get<std::uint8_t>(f) != 0;
    if (ck.has_optimizer) {
        ck.opt_t = static_cast<long>(get<std::int64_t>(f));
        ck.opt_state.resize(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            ck.opt_state[i].m.resize(ck.tensors[i].tensor.numel());
            ck.opt_state[i].v.resize(ck.tensors[i].tensor.numel());
            get_doubles(f, ck.opt_state[i].m);
            get_doubles(f, ck.opt_state[i].v);
        }
    }
    return ck;
}

void restore_params(const CheckpointData& ckpt, ParamList& params, std::uint64_t config_hash,
                    bool force) {
    if (!force && ckpt.config_hash != config_hash)
        throw std::runtime_error("checkpoint config hash mismatch (use --force to override)");
    std::unordered_map<std::string, const Tensor*> table;
    for (const NamedTensor& t : ckpt.tensors) table[t.name] = &t.tensor;
    for (NamedTensor& p : params) {
        auto it = table.find(p.name);
        if (it == table.end())
            throw std::runtime_error("checkpoint missing tensor '" + p.name + "'");
        if (it->second->shape() != p.tensor.shape())
            throw std::runtime_error("checkpoint tensor '" + p.name + "' has shape " +
                                     it->second->shape_str() + ", expected " + p.tensor.shape_str());
        p.tensor.values() = it->second->values();
    }
}

void save_codes(const std::string& path, const CodeFile& cf) {
    std::ofstream f = open_out(path);
    f.write(kCodeMagic, 8);
    put<std::uint32_t>(f, 1);
    put<std::uint64_t>(f, cf.n);
    put<std::uint64_t>(f, cf.d);
    put<std::uint64_t>(f, cf.codes.size());
    std::uint32_t k = cf.labels.empty() ? 0 : static_cast<std::uint32_t>(cf.labels[0].size());
    put<std::uint32_t>(f, k);
    for (const Tensor& t : cf.codes) {
        if (t.rows() != cf.n || t.cols() != cf.d)
            throw std::runtime_error("save_codes: code shape " + t.shape_str() + " mismatch");
        put_doubles(f, t.values());
    }
    for (const auto& row : cf.labels)
        for (int v : row) put<std::uint8_t>(f, static_cast<std::uint8_t>(v));
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

CodeFile load_codes(const std::string& path) {
    std::ifstream f = open_in(path, kCodeMagic);
    std::uint32_t ver = get<std::uint32_t>(f);
    if (ver != 1) throw std::runtime_error("code file version " + std::to_string(ver));
    CodeFile cf;
    cf.n = static_cast<std::size_t>(get<std::uint64_t>(f));
    cf.d = static_cast<std::size_t>(get<std::uint64_t>(f));
    std::size_t count = static_cast<std::size_t>(get<std::uint64_t>(f));
    std::uint32_t k = get<std::uint32_t>(f);
    cf.codes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor t({cf.n, cf.d});
        get_doubles(f, t.values());
        cf.codes.push_back(std::move(t));
    }
    if (k) {
        cf.labels.assign(count, std::vector<int>(k));
        for (auto& row : cf.labels)
            for (int& v : row) v = get<std::uint8_t>(f);
    }
    return cf;
}

void save_images(const std::string& path, const ImageFile& imf) {
    std::ofstream f = open_out(path);
    f.write(kImgMagic, 8);
    put<std::uint32_t>(f, 1);
    put<std::uint64_t>(f, imf.h);
    put<std::uint64_t>(f, imf.w);
    put<std::uint64_t>(f, imf.c);
    put<std::uint64_t>(f, imf.images.size());
    for (const Tensor& t : imf.images) {
        if (t.rows() != imf.h * imf.w || t.cols() != imf.c)
            throw std::runtime_error("save_images: image shape " + t.shape_str() + " mismatch");
        put_doubles(f, t.values());
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

ImageFile load_images(const std::string& path) {
    std::ifstream f = open_in(path, kImgMagic);
    std::uint32_t ver = get<std::uint32_t>(f);
    if (ver != 1) throw std::runtime_error("image file version " + std::to_string(ver));
    ImageFile imf;
    imf.h = static_cast<std::size_t>(get<std::uint64_t>(f));
    imf.w = static_cast<std::size_t>(get<std::uint64_t>(f));
    imf.c = static_cast<std::size_t>(get<std::uint64_t>(f));
    std::size_t count = static_cast<std::size_t>(get<std::uint64_t>(f));
    for (std::size_t i = 0; i < count; ++i) {
        Tensor t({imf.h * imf.w, imf.c});
        get_doubles(f, t.values());
        imf.images.push_back(std::move(t));
    }
    return imf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
            f << (i ? "," : "") << buf;
        }
        f << "\n";
    }
}

}  // namespace stylet
