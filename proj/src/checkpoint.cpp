#include "lumir/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lumir {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_f64_array(std::ostream& os, const double* p, std::int64_t n) {
    static_assert(sizeof(double) == 8);
    for (std::int64_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, p + i, 8);
        write_u64(os, bits);
    }
}

void read_f64_array(std::istream& is, double* p, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) {
        std::uint64_t bits = read_u64(is);
        std::memcpy(p + i, &bits, 8);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const ScheduleSpec& schedule) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);

    KvConfig cfg;
    model.config().to_config(cfg);
    schedule_spec_to_config(schedule, cfg);
    std::string text = cfg.serialize();
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    const ParamStore& params = model.params();
    write_u64(os, params.names().size());
    for (const std::string& name : params.names()) {
        const Tensor& t = params.get(name);
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
        write_f64_array(os, t.data(), t.numel());
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version));
    }
    std::uint64_t cfg_len = read_u64(is);
    std::string text(cfg_len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(cfg_len));
    if (!is) throw std::runtime_error("checkpoint: truncated config block");
    KvConfig cfg = KvConfig::parse_text(text);
    ModelConfig mc = ModelConfig::from_config(cfg);
    ScheduleSpec schedule = schedule_spec_from_config(cfg);

    Rng dummy(0);
    Model model(mc, dummy);

    std::uint64_t count = read_u64(is);
    if (count != model.params().names().size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch (" + std::to_string(count) +
                                 " stored, " + std::to_string(model.params().names().size()) +
                                 " expected from config)");
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated parameter name");
        const std::string& expected = model.params().names()[static_cast<size_t>(i)];
        if (name != expected) {
            throw std::runtime_error("checkpoint: parameter order mismatch at index " +
                                     std::to_string(i) + ": stored '" + name + "', expected '" +
                                     expected + "'");
        }
        std::uint32_t rank = read_u32(is);
        std::vector<int> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(read_u32(is));
        Tensor& dst = model.params().get(name);
        if (dst.shape() != shape) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': stored " +
                                     shape_str(shape) + ", expected " + shape_str(dst));
        }
        read_f64_array(is, dst.data(), dst.numel());
        if (!is) throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
    }
    return LoadedCheckpoint{std::move(model), std::move(schedule)};
}

}  // namespace lumir
