#include "mcigle/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace mcigle {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'G', 'L', 'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw InputError(std::string("tensor file truncated reading ") + what);
    }
    return value;
}

}  // namespace

void save_tensor_file(const std::filesystem::path& path, const NamedMatrices& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open for writing: " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint64_t>(m.rows()));
        write_pod(out, static_cast<std::uint64_t>(m.cols()));
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    if (!out) {
        throw InputError("write failed: " + path.string());
    }
}

NamedMatrices load_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open for reading: " + path.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw InputError("not a tensor file: " + path.string());
    }
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw InputError("unsupported tensor file version " + std::to_string(version));
    }
    const auto count = read_pod<std::uint32_t>(in, "tensor count");
    NamedMatrices tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = read_pod<std::uint64_t>(in, "rows");
        const auto cols = read_pod<std::uint64_t>(in, "cols");
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) {
            throw InputError("tensor file truncated reading data of " + name);
        }
        tensors.emplace_back(std::move(name), std::move(m));
    }
    return tensors;
}

const Matrix& find_tensor(const NamedMatrices& tensors, const std::string& name) {
    for (const auto& [n, m] : tensors) {
        if (n == name) {
            return m;
        }
    }
    throw InputError("tensor not found in checkpoint: " + name);
}

Matrix scalar_tensor(double value) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return m;
}

double tensor_scalar(const NamedMatrices& tensors, const std::string& name) {
    const Matrix& m = find_tensor(tensors, name);
    if (m.rows() != 1 || m.cols() != 1) {
        throw InputError("tensor is not scalar: " + name);
    }
    return m(0, 0);
}

}  // namespace mcigle
