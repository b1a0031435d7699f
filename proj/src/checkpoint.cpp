#include "cslm/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cslm {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'L', 'M'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw std::runtime_error(path + ": corrupt checkpoint, truncated while reading " +
                                     what + " at offset " + std::to_string(pos));
    }
    uint32_t u32(const char* what) {
        need(4, what);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 4;
        return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    }
    float f32(const char* what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

void put_matrix(std::string& out, const Matrix& m) {
    put_u32(out, static_cast<uint32_t>(m.rows));
    put_u32(out, static_cast<uint32_t>(m.cols));
    for (real v : m.data) put_f32(out, static_cast<float>(v));
}

Matrix read_matrix(Reader& r, const char* name, int want_rows, int want_cols) {
    const uint32_t rows = r.u32(name);
    const uint32_t cols = r.u32(name);
    if (static_cast<int>(rows) != want_rows || static_cast<int>(cols) != want_cols)
        throw std::runtime_error(r.path + ": array " + name + " has shape " +
                                 std::to_string(rows) + "x" + std::to_string(cols) +
                                 " but the header implies " + std::to_string(want_rows) + "x" +
                                 std::to_string(want_cols));
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    r.need(static_cast<size_t>(rows) * cols * 4, name);
    for (auto& v : m.data) v = static_cast<real>(r.f32(name));
    return m;
}

std::string header_text(const CheckpointMeta& meta) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(meta.vocab_hash));
    std::string h;
    h += "vocab_size=" + std::to_string(meta.dims.vocab) + "\n";
    h += "emb_dim=" + std::to_string(meta.dims.emb_dim) + "\n";
    h += "hidden_dim=" + std::to_string(meta.dims.hidden_dim) + "\n";
    h += "gate_order=" + meta.gate_order + "\n";
    h += "vocab_hash=" + std::string(hash) + "\n";
    h += "seed=" + std::to_string(meta.seed) + "\n";
    h += "regime=" + meta.regime + "\n";
    h += "epoch=" + std::to_string(meta.epoch) + "\n";
    return h;
}

CheckpointMeta parse_header(const std::string& text, const std::string& path) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ": malformed checkpoint header line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&kv, &path](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error(path + ": checkpoint header missing key '" + key + "'");
        return it->second;
    };
    CheckpointMeta meta;
    meta.dims.vocab = std::stoi(get("vocab_size"));
    meta.dims.emb_dim = std::stoi(get("emb_dim"));
    meta.dims.hidden_dim = std::stoi(get("hidden_dim"));
    meta.gate_order = get("gate_order");
    meta.vocab_hash = std::stoull(get("vocab_hash"), nullptr, 16);
    meta.seed = std::stoull(get("seed"));
    meta.regime = get("regime");
    meta.epoch = std::stoi(get("epoch"));
    if (meta.gate_order != "ifgo")
        throw std::runtime_error(path + ": unsupported gate order '" + meta.gate_order + "'");
    return meta;
}

} // namespace

void save_checkpoint(const std::string& path, const LstmParams& params,
                     const CheckpointMeta& meta) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    const std::string header = header_text(meta);
    put_u32(out, static_cast<uint32_t>(header.size()));
    out += header;
    put_matrix(out, params.emb);
    put_matrix(out, params.w_ih);
    put_matrix(out, params.w_hh);
    put_matrix(out, params.b_ih);
    put_matrix(out, params.b_hh);
    put_matrix(out, params.w_out);
    put_matrix(out, params.b_out);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write checkpoint: " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string buf = ss.str();

    Reader r{buf, 0, path};
    r.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a CSLM checkpoint (bad magic)");
    r.pos = 4;
    const uint32_t version = r.u32("version");
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const uint32_t header_len = r.u32("header length");
    r.need(header_len, "header");
    const std::string header = buf.substr(r.pos, header_len);
    r.pos += header_len;

    LoadedCheckpoint out;
    out.meta = parse_header(header, path);
    const ModelDims& d = out.meta.dims;
    out.params.emb = read_matrix(r, "E", d.vocab, d.emb_dim);
    out.params.w_ih = read_matrix(r, "W_ih", 4 * d.hidden_dim, d.emb_dim);
    out.params.w_hh = read_matrix(r, "W_hh", 4 * d.hidden_dim, d.hidden_dim);
    out.params.b_ih = read_matrix(r, "b_ih", 4 * d.hidden_dim, 1);
    out.params.b_hh = read_matrix(r, "b_hh", 4 * d.hidden_dim, 1);
    out.params.w_out = read_matrix(r, "W_out", d.vocab, d.hidden_dim);
    out.params.b_out = read_matrix(r, "b_out", d.vocab, 1);
    if (r.pos != buf.size())
        throw std::runtime_error(path + ": trailing bytes after payload at offset " +
                                 std::to_string(r.pos));
    return out;
}

} // namespace cslm
