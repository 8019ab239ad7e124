#include "anerf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "anerf/errors.hpp"

namespace anerf {

namespace {

constexpr char kMagic[4] = {'A', 'N', 'R', 'F'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_i32(std::ostream& os, int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& is) {
    uint32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
int32_t get_i32(std::istream& is) {
    int32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
int64_t get_i64(std::istream& is) {
    int64_t v;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_tensors(std::ostream& os, const MlpParams& p) {
    p.visit([&](const auto& t) {
        put_u32(os, static_cast<uint32_t>(t.rows()));
        put_u32(os, static_cast<uint32_t>(t.cols()));
        os.write(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
    });
}

void read_tensors(std::istream& is, MlpParams& p, const std::filesystem::path& path) {
    p.visit([&](auto& t) {
        uint32_t rows = get_u32(is);
        uint32_t cols = get_u32(is);
        if (rows != static_cast<uint32_t>(t.rows()) || cols != static_cast<uint32_t>(t.cols()))
            throw ParseError(path.string() + ": tensor shape does not match config");
        is.read(reinterpret_cast<char*>(t.data()), t.size() * sizeof(float));
    });
    if (!is) throw ParseError(path.string() + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");

    os.write(kMagic, 4);
    put_u32(os, kVersion);

    const MlpConfig& c = ckpt.config;
    put_i32(os, c.trunk_layers);
    put_i32(os, c.hidden_units);
    put_i32(os, c.pe_frequencies_pos);
    put_i32(os, c.pe_frequencies_dir);
    put_i32(os, c.skip_connection_at);
    put_i32(os, c.color_head_units);
    uint32_t flags = (c.include_input_in_encoding ? 1u : 0u) | (c.softplus_density ? 2u : 0u) |
                     (c.record_preact ? 4u : 0u);
    put_u32(os, flags);

    put_u32(os, 2);  // networks: coarse, fine
    write_tensors(os, ckpt.coarse);
    write_tensors(os, ckpt.fine);

    bool has_opt = ckpt.opt_coarse.has_value() && ckpt.opt_fine.has_value();
    os.put(has_opt ? 1 : 0);
    if (has_opt) {
        for (const AdamState* st : {&*ckpt.opt_coarse, &*ckpt.opt_fine}) {
            put_i64(os, st->step);
            write_tensors(os, st->m);
            write_tensors(os, st->v);
        }
    }
    if (!os) throw RuntimeFailure("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open checkpoint " + path.string());

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError(path.string() + ": not an ANRF checkpoint");
    uint32_t version = get_u32(is);
    if (version != kVersion)
        throw ParseError(path.string() + ": unsupported checkpoint version " +
                         std::to_string(version));

    Checkpoint ckpt;
    MlpConfig& c = ckpt.config;
    c.trunk_layers = get_i32(is);
    c.hidden_units = get_i32(is);
    c.pe_frequencies_pos = get_i32(is);
    c.pe_frequencies_dir = get_i32(is);
    c.skip_connection_at = get_i32(is);
    c.color_head_units = get_i32(is);
    uint32_t flags = get_u32(is);
    c.include_input_in_encoding = flags & 1u;
    c.softplus_density = flags & 2u;
    c.record_preact = flags & 4u;
    if (!is) throw ParseError(path.string() + ": truncated config block");
    c.validate();

    uint32_t n_networks = get_u32(is);
    if (n_networks != 2)
        throw ParseError(path.string() + ": expected 2 networks, found " +
                         std::to_string(n_networks));

    ckpt.coarse = make_gradients(c);  // shaped, zero-filled
    ckpt.fine = make_gradients(c);
    read_tensors(is, ckpt.coarse, path);
    read_tensors(is, ckpt.fine, path);

    int opt_flag = is.get();
    if (opt_flag == 1) {
        AdamState sc = make_adam_state(c);
        AdamState sf = make_adam_state(c);
        for (AdamState* st : {&sc, &sf}) {
            st->step = get_i64(is);
            read_tensors(is, st->m, path);
            read_tensors(is, st->v, path);
        }
        ckpt.opt_coarse = std::move(sc);
        ckpt.opt_fine = std::move(sf);
    }
    return ckpt;
}

}  // namespace anerf
