#include "summer/checkpoint.hpp"

#include "summer/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace summer {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'M', 'M', 'E', 'R', 'C', 'K'};

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void str(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        out_ += s;
    }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    std::string take() { return std::move(out_); }

private:
    void le(std::uint64_t v, int bytes)
    {
        for (int i = 0; i < bytes; ++i)
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string str()
    {
        const std::size_t n = u32();
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string raw(std::size_t n)
    {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::uint64_t le(int bytes)
    {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

} // namespace

Checkpoint make_checkpoint(std::string kind, std::uint64_t epoch, std::uint64_t seed, std::string config,
                           const ParamList& params)
{
    Checkpoint c{std::move(kind), epoch, seed, std::move(config), {}};
    c.tensors.reserve(params.size());
    for (const auto& p : params)
        c.tensors.push_back({p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}});
    return c;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint)
{
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.str(checkpoint.kind);
    w.u64(checkpoint.epoch);
    w.u64(checkpoint.seed);
    w.str(checkpoint.config);
    w.u64(checkpoint.tensors.size());
    for (const auto& t : checkpoint.tensors) {
        w.str(t.name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape)
            w.u64(d);
        for (double v : t.values)
            w.f64(v);
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes)
{
    Reader r(bytes);
    if (r.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
        throw ParseError("not a checkpoint file (bad magic)");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.kind = r.str();
    c.epoch = r.u64();
    c.seed = r.u64();
    c.config = r.str();
    const auto count = r.u64();
    for (std::uint64_t k = 0; k < count; ++k) {
        StoredTensor t;
        t.name = r.str();
        const auto rank = r.u32();
        std::size_t n = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            t.shape.push_back(static_cast<std::size_t>(r.u64()));
            n *= t.shape.back();
        }
        if (n > bytes.size() / 8)
            throw ParseError("checkpoint tensor '" + t.name + "' is larger than the file");
        t.values.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            t.values.push_back(r.f64());
        c.tensors.push_back(std::move(t));
    }
    if (!r.done())
        throw ParseError("trailing bytes after checkpoint payload");
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write checkpoint '" + path + "'");
    const std::string bytes = serialize_checkpoint(checkpoint);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read checkpoint '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

void restore_parameters(const ParamList& params, const Checkpoint& checkpoint)
{
    if (params.size() != checkpoint.tensors.size())
        throw ValidationError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                              " tensors, model has " + std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& stored = checkpoint.tensors[k];
        if (stored.name != params[k].name)
            throw ValidationError("checkpoint tensor " + std::to_string(k) + " is '" + stored.name +
                                  "', expected '" + params[k].name + "'");
        if (stored.shape != params[k].tensor.shape())
            throw ValidationError("checkpoint tensor '" + stored.name + "' has shape " +
                                  shape_string(stored.shape) + ", expected " +
                                  shape_string(params[k].tensor.shape()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor t = params[k].tensor;
        auto dst = t.mutable_values();
        std::memcpy(dst.data(), checkpoint.tensors[k].values.data(), dst.size() * sizeof(double));
    }
}

} // namespace summer
