#ifndef OVC_VIDEO_IO_HPP
#define OVC_VIDEO_IO_HPP

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ovc/frame.hpp"

namespace ovc {

struct VideoBuffer {
    int w = 0, h = 0, depth = 8;
    double fps = 25.0;
    std::vector<Planes420> frames;
};

namespace detail {

inline void read_plane(std::istream& in, uint16_t* dst, size_t n, int depth) {
    if (depth == 8) {
        std::vector<uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!in) throw io_error("unexpected end of video data");
        for (size_t i = 0; i < n; ++i) dst[i] = buf[i];
    } else {
        std::vector<uint8_t> buf(n * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
        if (!in) throw io_error("unexpected end of video data");
        for (size_t i = 0; i < n; ++i)
            dst[i] = static_cast<uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    }
}

inline void write_plane(std::ostream& out, const uint16_t* src, size_t n, int depth) {
    if (depth == 8) {
        std::vector<uint8_t> buf(n);
        for (size_t i = 0; i < n; ++i) buf[i] = static_cast<uint8_t>(src[i]);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n));
    } else {
        std::vector<uint8_t> buf(n * 2);
        for (size_t i = 0; i < n; ++i) {
            buf[2 * i] = static_cast<uint8_t>(src[i] & 0xff);
            buf[2 * i + 1] = static_cast<uint8_t>(src[i] >> 8);
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * 2));
    }
}

}  // namespace detail

// Raw planar YUV420, 8-bit or 10-bit little-endian.
inline VideoBuffer read_yuv(const std::string& path, int w, int h, int depth, int max_frames = -1) {
    if (depth != 8 && depth != 10) throw config_error("bit depth must be 8 or 10");
    if (w % 2 || h % 2) throw config_error("frame dimensions must be even");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    VideoBuffer vb;
    vb.w = w;
    vb.h = h;
    vb.depth = depth;
    while (max_frames < 0 || static_cast<int>(vb.frames.size()) < max_frames) {
        if (in.peek() == EOF) break;
        Planes420 p = Planes420::make(w, h, depth);
        detail::read_plane(in, p.y.data(), p.y.size(), depth);
        detail::read_plane(in, p.u.data(), p.u.size(), depth);
        detail::read_plane(in, p.v.data(), p.v.size(), depth);
        vb.frames.push_back(std::move(p));
    }
    if (vb.frames.empty()) throw io_error("no frames in " + path);
    return vb;
}

inline void write_yuv(const std::string& path, const std::vector<Planes420>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    for (const auto& p : frames) {
        detail::write_plane(out, p.y.data(), p.y.size(), p.depth);
        detail::write_plane(out, p.u.data(), p.u.size(), p.depth);
        detail::write_plane(out, p.v.data(), p.v.size(), p.depth);
    }
}

// Y4M container, C420 family (treated as co-sited 2x2) at 8 bit, C420p10 at 10.
inline VideoBuffer read_y4m(const std::string& path, int max_frames = -1) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw format_error("missing y4m header");
    if (header.rfind("YUV4MPEG2", 0) != 0) throw format_error("not a y4m file");
    VideoBuffer vb;
    std::istringstream hs(header);
    std::string tok;
    hs >> tok;  // YUV4MPEG2
    int fps_num = 25, fps_den = 1;
    std::string colorspace = "420";
    while (hs >> tok) {
        if (tok[0] == 'W') vb.w = std::stoi(tok.substr(1));
        else if (tok[0] == 'H') vb.h = std::stoi(tok.substr(1));
        else if (tok[0] == 'F') std::sscanf(tok.c_str() + 1, "%d:%d", &fps_num, &fps_den);
        else if (tok[0] == 'C') colorspace = tok.substr(1);
    }
    if (vb.w <= 0 || vb.h <= 0) throw format_error("y4m header lacks dimensions");
    if (colorspace.rfind("420", 0) != 0) throw format_error("unsupported y4m colorspace " + colorspace);
    vb.depth = colorspace.find("p10") != std::string::npos ? 10 : 8;
    vb.fps = fps_den > 0 ? static_cast<double>(fps_num) / fps_den : 25.0;
    std::string line;
    while ((max_frames < 0 || static_cast<int>(vb.frames.size()) < max_frames) && std::getline(in, line)) {
        if (line.rfind("FRAME", 0) != 0) throw format_error("bad y4m frame marker");
        Planes420 p = Planes420::make(vb.w, vb.h, vb.depth);
        detail::read_plane(in, p.y.data(), p.y.size(), vb.depth);
        detail::read_plane(in, p.u.data(), p.u.size(), vb.depth);
        detail::read_plane(in, p.v.data(), p.v.size(), vb.depth);
        vb.frames.push_back(std::move(p));
    }
    if (vb.frames.empty()) throw format_error("y4m file has no frames");
    return vb;
}

inline void write_y4m(const std::string& path, const VideoBuffer& vb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << "YUV4MPEG2 W" << vb.w << " H" << vb.h << " F25:1 Ip A1:1 C420"
        << (vb.depth == 10 ? "p10" : "") << "\n";
    for (const auto& p : vb.frames) {
        out << "FRAME\n";
        detail::write_plane(out, p.y.data(), p.y.size(), p.depth);
        detail::write_plane(out, p.u.data(), p.u.size(), p.depth);
        detail::write_plane(out, p.v.data(), p.v.size(), p.depth);
    }
}

inline VideoBuffer read_video(const std::string& path, int w, int h, int depth, int max_frames = -1) {
    const bool y4m = path.size() > 4 && path.substr(path.size() - 4) == ".y4m";
    return y4m ? read_y4m(path, max_frames) : read_yuv(path, w, h, depth, max_frames);
}

}  // namespace ovc

#endif
