#include "spectron/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spectron {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
    const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(bytes, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

void put_f64(std::ostream& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

[[noreturn]] void corrupt(const std::string& path, const std::string& what) {
    throw std::runtime_error("checkpoint '" + path + "': " + what);
}

std::uint64_t take_le(std::istream& in, int n_bytes, const std::string& path,
                      const char* field) {
    char bytes[8] = {};
    in.read(bytes, n_bytes);
    if (in.gcount() != n_bytes) corrupt(path, std::string("truncated while reading ") + field);
    std::uint64_t v = 0;
    for (int i = 0; i < n_bytes; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    return v;
}

} // namespace

void write_checkpoint(const std::string& path, const TensorList& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint '" + path + "': cannot open for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    for (const auto& [name, tensor] : tensors) {
        if (name.size() > 0xffff)
            throw std::runtime_error("checkpoint '" + path + "': tensor name '" +
                                     name.substr(0, 32) + "...' exceeds 65535 bytes");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(tensor.rows()));
        put_u32(out, static_cast<std::uint32_t>(tensor.cols()));
        for (std::size_t i = 0; i < tensor.rows(); ++i)
            for (std::size_t j = 0; j < tensor.cols(); ++j) put_f64(out, tensor(i, j));
    }
    out.flush();
    if (!out) throw std::runtime_error("checkpoint '" + path + "': write failed");
}

TensorList read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) corrupt(path, "cannot open");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) corrupt(path, "bad magic");
    const std::uint64_t version = take_le(in, 4, path, "version");
    if (version != kVersion)
        corrupt(path, "unsupported version " + std::to_string(version));

    TensorList tensors;
    while (true) {
        char first;
        in.read(&first, 1);
        if (in.gcount() == 0) break; // clean end of file
        in.putback(first);

        const std::uint64_t name_len = take_le(in, 2, path, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (static_cast<std::uint64_t>(in.gcount()) != name_len)
            corrupt(path, "truncated tensor name");
        const std::uint64_t rows = take_le(in, 4, path, "rows");
        const std::uint64_t cols = take_le(in, 4, path, "cols");
        DenseMatrix tensor(rows, cols);
        for (std::size_t i = 0; i < tensor.rows(); ++i)
            for (std::size_t j = 0; j < tensor.cols(); ++j) {
                const std::uint64_t bits = take_le(in, 8, path, "tensor data");
                tensor(i, j) = std::bit_cast<double>(bits);
            }
        tensors.emplace_back(std::move(name), std::move(tensor));
    }
    return tensors;
}

} // namespace spectron
