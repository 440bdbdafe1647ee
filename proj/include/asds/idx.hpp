#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "asds/dataset.hpp"
#include "asds/tensor.hpp"

namespace asds {

/// IDX image/label files (the MNIST container): big-endian u32 magic and
/// extents followed by raw bytes. Magic 0x00000803 = u8 rank-3 images,
/// 0x00000801 = u8 rank-1 labels.
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be_u32(std::istream& is, std::uint64_t& offset, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is)
        throw FormatError(std::string("idx: truncated ") + what + " at byte offset " +
                          std::to_string(offset));
    offset += 4;
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace detail

/// Loads an IDX image file + IDX label file as a flat dataset with pixel
/// values scaled to [0, 1]. The clipping box is the full pixel range.
template <typename T = float>
LabeledDataset<T> load_idx(const std::string& images_path, const std::string& labels_path,
                           int classes = 10) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError("idx: cannot open \"" + images_path + "\"");
    std::uint64_t offset = 0;
    const std::uint32_t magic = detail::read_be_u32(imgs, offset, "magic");
    if (magic != kIdxImagesMagic)
        throw FormatError("idx: bad image magic at byte 0: expected " +
                          std::to_string(kIdxImagesMagic) + ", found " + std::to_string(magic));
    const std::uint32_t count = detail::read_be_u32(imgs, offset, "count");
    const std::uint32_t rows = detail::read_be_u32(imgs, offset, "rows");
    const std::uint32_t cols = detail::read_be_u32(imgs, offset, "cols");
    if (count == 0 || rows == 0 || cols == 0)
        throw FormatError("idx: zero extent in image header (byte 4)");

    const std::size_t dims = std::size_t(rows) * cols;
    std::vector<unsigned char> pixel_row(dims);
    LabeledDataset<T> ds;
    ds.inputs = Tensor<T>({count, dims});
    for (std::uint32_t i = 0; i < count; ++i) {
        imgs.read(reinterpret_cast<char*>(pixel_row.data()), static_cast<std::streamsize>(dims));
        if (!imgs)
            throw FormatError("idx: truncated pixel data at byte offset " + std::to_string(offset));
        offset += dims;
        for (std::size_t j = 0; j < dims; ++j)
            ds.inputs(i, j) = static_cast<T>(pixel_row[j] / 255.0);
    }

    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw FormatError("idx: cannot open \"" + labels_path + "\"");
    std::uint64_t loffset = 0;
    const std::uint32_t lmagic = detail::read_be_u32(labels, loffset, "magic");
    if (lmagic != kIdxLabelsMagic)
        throw FormatError("idx: bad label magic at byte 0: expected " +
                          std::to_string(kIdxLabelsMagic) + ", found " + std::to_string(lmagic));
    const std::uint32_t lcount = detail::read_be_u32(labels, loffset, "count");
    if (lcount != count)
        throw FormatError("idx: image/label count mismatch: " + std::to_string(count) + " vs " +
                          std::to_string(lcount));
    std::vector<unsigned char> raw(lcount);
    labels.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(lcount));
    if (!labels)
        throw FormatError("idx: truncated label data at byte offset " + std::to_string(loffset));

    ds.labels.assign(raw.begin(), raw.end());
    ds.classes = classes;
    ds.family = "idx";
    ds.valid_lo = Tensor<T>({dims});
    ds.valid_hi = Tensor<T>({dims});
    ds.valid_lo.fill(T(0));
    ds.valid_hi.fill(T(1));
    ds.check();
    return ds;
}

/// Writes IDX pairs from byte images; the inverse of load_idx up to the
/// [0, 1] scaling. Used for round-trip tests and small fixtures.
inline void save_idx(const std::string& images_path, const std::string& labels_path,
                     const std::vector<unsigned char>& pixels, std::uint32_t count,
                     std::uint32_t rows, std::uint32_t cols,
                     const std::vector<unsigned char>& labels) {
    require(pixels.size() == std::size_t(count) * rows * cols, "save_idx: pixel size mismatch");
    require(labels.size() == count, "save_idx: label size mismatch");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError("idx: cannot write \"" + images_path + "\"");
    detail::write_be_u32(imgs, kIdxImagesMagic);
    detail::write_be_u32(imgs, count);
    detail::write_be_u32(imgs, rows);
    detail::write_be_u32(imgs, cols);
    imgs.write(reinterpret_cast<const char*>(pixels.data()),
               static_cast<std::streamsize>(pixels.size()));

    std::ofstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw FormatError("idx: cannot write \"" + labels_path + "\"");
    detail::write_be_u32(lbls, kIdxLabelsMagic);
    detail::write_be_u32(lbls, count);
    lbls.write(reinterpret_cast<const char*>(labels.data()),
               static_cast<std::streamsize>(labels.size()));
}

} // namespace asds
