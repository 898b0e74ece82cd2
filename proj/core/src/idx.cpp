#include "dtfl/idx.hpp"

#include <cstdint>
#include <fstream>

#include "dtfl/errors.hpp"

namespace dtfl {
namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw TruncatedFile("truncated IDX header: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

IdxDataset load_idx_dataset(const std::string& images_path,
                            const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw TruncatedFile("cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw TruncatedFile("cannot open " + labels_path);

    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != 0x00000803u) throw BadMagic("bad image magic in " + images_path);
    const std::uint32_t n_images = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != 0x00000801u) throw BadMagic("bad label magic in " + labels_path);
    const std::uint32_t n_labels = read_be32(lab, labels_path);

    if (n_images != n_labels) {
        throw CountMismatch("image count " + std::to_string(n_images) +
                            " != label count " + std::to_string(n_labels));
    }

    IdxDataset out;
    out.rows = static_cast<int>(rows);
    out.cols = static_cast<int>(cols);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    out.samples.resize(n_images);

    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!img) throw TruncatedFile("truncated image data in " + images_path);
        Sample& s = out.samples[i];
        s.features.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) s.features[p] = buf[p] / 255.0;
        char l;
        lab.read(&l, 1);
        if (!lab) throw TruncatedFile("truncated label data in " + labels_path);
        s.label = static_cast<unsigned char>(l);
    }
    return out;
}

}  // namespace dtfl
