// Command-line surface: encode / decode / metrics / bdrate / audit / flow.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "ovc/ovc.hpp"

using json = nlohmann::json;

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ovc::io_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ovc::io_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

uint8_t gop_id_of(const std::string& name) {
    if (name == "intra") return ovc::kGopAllIntra;
    if (name == "ra") return ovc::kGopRandomAccess;
    if (name == "lowdelay") return ovc::kGopLowDelayP;
    throw ovc::config_error("unknown GOP structure '" + name + "' (intra|ra|lowdelay)");
}

void apply_config_file(ovc::EncoderConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ovc::io_error("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ovc::config_error(std::string("bad config JSON: ") + e.what());
    }
    if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
    if (j.contains("iterations")) {
        const auto& it = j["iterations"];
        if (it.contains("pretrain")) cfg.iters_pretrain = it["pretrain"].get<int>();
        if (it.contains("frame")) cfg.iters_frame = it["frame"].get<int>();
        if (it.contains("joint")) cfg.iters_joint = it["joint"].get<int>();
    }
    if (j.contains("gop")) cfg.gop_id = gop_id_of(j["gop"].get<std::string>());
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("checkpoint_every")) cfg.checkpoint_every = j["checkpoint_every"].get<int>();
    if (j.contains("flow")) {
        const auto& f = j["flow"];
        if (f.contains("source")) {
            const std::string s = f["source"].get<std::string>();
            if (s == "builtin") cfg.flow_source = ovc::FlowSource::Builtin;
            else if (s == "flo-dir") cfg.flow_source = ovc::FlowSource::FloDir;
            else throw ovc::config_error("flow.source must be builtin or flo-dir");
        }
        if (f.contains("dir")) cfg.flow_dir = f["dir"].get<std::string>();
    }
    if (j.contains("lambda_t"))
        for (const auto& [k, v] : j["lambda_t"].items())
            cfg.lambda_t[std::stoi(k)] = v.get<double>();
    if (j.contains("ablation")) {
        const auto& a = j["ablation"];
        if (a.contains("pretrain")) cfg.pretrain = a["pretrain"].get<bool>();
        if (a.contains("joint")) cfg.joint = a["joint"].get<bool>();
    }
}

json report_to_json(const ovc::EncodeReport& r) {
    json j;
    j["width"] = r.w;
    j["height"] = r.h;
    j["bit_depth"] = r.depth;
    j["frame_count"] = r.frame_count;
    j["lambda"] = r.lambda;
    j["lambda_v"] = r.lambda_v;
    j["total_bits"] = r.total_bits;
    j["bpp"] = r.bpp;
    j["psnr_db"] = r.psnr_db;
    j["global_header_bits"] = r.global_header_bits;
    for (const auto& f : r.frames) {
        json jf;
        jf["frame"] = f.display_idx;
        jf["type"] = std::string(1, f.kind);
        jf["motion_latent_bits"] = f.motion_latent_bits;
        jf["residue_latent_bits"] = f.residue_latent_bits;
        jf["param_bits"] = f.param_bits;
        jf["header_bits"] = f.header_bits;
        jf["total_bits"] = f.total_bits();
        jf["estimated_latent_bits"] = f.estimated_latent_bits;
        jf["psnr_db"] = f.psnr_db;
        j["frames"].push_back(jf);
    }
    for (const auto& c : r.curves) {
        json jc;
        jc["stage"] = c.stage;
        for (const auto& [it, cost] : c.cost) jc["cost"].push_back({it, cost});
        j["curves"].push_back(jc);
    }
    return j;
}

void write_rates_tsv(const std::string& path, const ovc::EncodeReport& r) {
    std::ofstream out(path);
    if (!out) throw ovc::io_error("cannot open " + path + " for writing");
    out << "frame\ttype\tmotion_bits\tresidue_bits\tparam_bits\theader_bits\ttotal_bits\tpsnr_db\n";
    for (const auto& f : r.frames)
        out << f.display_idx << '\t' << f.kind << '\t' << f.motion_latent_bits << '\t'
            << f.residue_latent_bits << '\t' << f.param_bits << '\t' << f.header_bits << '\t'
            << f.total_bits() << '\t' << f.psnr_db << '\n';
}

std::vector<ovc::RdPoint> read_rd_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ovc::io_error("cannot open " + path);
    std::vector<ovc::RdPoint> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) pts.push_back({a, b});
        // header lines (rate_bpp psnr_db) fail the numeric parse and are skipped
    }
    if (pts.empty()) throw ovc::metric_error("no rate points in " + path);
    return pts;
}

int run(int argc, char** argv) {
    CLI::App app{"overfitted neural video codec"};
    app.require_subcommand(1);

    // ---- encode ----
    auto* enc = app.add_subcommand("encode", "overfit a GOP and emit a bitstream");
    std::string in_path, out_path = "out.ovc", cfg_path, report_path, rates_path, recon_path;
    int width = 0, height = 0, depth = 8, frames = -1;
    ovc::EncoderConfig cfg;
    std::string gop_name;
    bool skip_pretrain = false, skip_joint = false, paper_scale = false;
    std::string flow_source_name, flow_dir;
    double lambda = -1.0;
    int it_pre = -1, it_frame = -1, it_joint = -1;
    uint64_t seed = 0;
    bool seed_set = false;
    enc->add_option("--input", in_path, "input video (.yuv or .y4m)")->required();
    enc->add_option("--output", out_path, "output bitstream");
    enc->add_option("--width", width, "width (raw .yuv input)");
    enc->add_option("--height", height, "height (raw .yuv input)");
    enc->add_option("--depth", depth, "bit depth, 8 or 10");
    enc->add_option("--frames", frames, "number of frames to encode");
    enc->add_option("--config", cfg_path, "JSON config file");
    enc->add_option("--lambda", lambda, "rate constraint");
    enc->add_option("--gop", gop_name, "GOP structure: intra|ra|lowdelay");
    enc->add_option("--iters-pretrain", it_pre, "motion pre-training iterations per frame");
    enc->add_option("--iters-frame", it_frame, "frame-wise iterations per frame");
    enc->add_option("--iters-joint", it_joint, "joint optimization iterations");
    enc->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) { seed_set = true; });
    enc->add_flag("--skip-pretrain", skip_pretrain, "ablation: no motion pre-training");
    enc->add_flag("--skip-joint", skip_joint, "ablation: no joint optimization");
    enc->add_flag("--paper-scale", paper_scale, "use 1e4/1e4/1e5 iteration budgets");
    enc->add_option("--flow-source", flow_source_name, "builtin|flo-dir");
    enc->add_option("--flow-dir", flow_dir, "directory with flow_t<T>_ref<K>.flo files");
    enc->add_option("--report", report_path, "write the encode report JSON here");
    enc->add_option("--rates", rates_path, "write the per-frame rate table TSV here");
    enc->add_option("--recon", recon_path, "write the encoder-side reconstruction YUV here");
    std::string rd_append;
    enc->add_option("--rd-append", rd_append, "append this run's (bpp, psnr) to an RD TSV");

    // ---- decode ----
    auto* dec = app.add_subcommand("decode", "decode a bitstream to YUV");
    std::string d_in, d_out = "out.yuv";
    bool d_y4m = false;
    dec->add_option("--input", d_in, "bitstream")->required();
    dec->add_option("--output", d_out, "output video");
    dec->add_flag("--y4m", d_y4m, "write a Y4M container instead of raw YUV");

    // ---- metrics ----
    auto* met = app.add_subcommand("metrics", "PSNR between two videos");
    std::string m_ref, m_test, m_domain = "yuv420", m_bitstream;
    int m_w = 0, m_h = 0, m_depth = 8, m_frames = -1;
    met->add_option("--ref", m_ref, "reference video")->required();
    met->add_option("--test", m_test, "decoded video")->required();
    met->add_option("--width", m_w, "width (raw .yuv)");
    met->add_option("--height", m_h, "height (raw .yuv)");
    met->add_option("--depth", m_depth, "bit depth");
    met->add_option("--frames", m_frames, "frame count limit");
    met->add_option("--domain", m_domain, "yuv420|rgb");
    met->add_option("--bitstream", m_bitstream, "bitstream file for bpp");

    // ---- bdrate ----
    auto* bdr = app.add_subcommand("bdrate", "Bjontegaard delta rate between two RD curves");
    std::string b_anchor, b_test;
    bdr->add_option("--anchor", b_anchor, "anchor TSV (rate_bpp psnr_db)")->required();
    bdr->add_option("--test", b_test, "test TSV")->required();

    // ---- audit ----
    auto* aud = app.add_subcommand("audit", "decoder complexity census (MAC/pixel)");
    int a_w = 256, a_h = 256, a_frames = 9;
    std::string a_gop = "ra";
    aud->add_option("--width", a_w, "frame width");
    aud->add_option("--height", a_h, "frame height");
    aud->add_option("--frames", a_frames, "frame count");
    aud->add_option("--gop", a_gop, "GOP structure: intra|ra|lowdelay");

    // ---- flow ----
    auto* flo = app.add_subcommand("flow", "estimate the flow between two frames");
    std::string f_in, f_out = "out.flo";
    int f_w = 0, f_h = 0, f_depth = 8, f_src = 1, f_dst = 0;
    flo->add_option("--input", f_in, "input video")->required();
    flo->add_option("--width", f_w, "width (raw .yuv)");
    flo->add_option("--height", f_h, "height (raw .yuv)");
    flo->add_option("--depth", f_depth, "bit depth");
    flo->add_option("--src", f_src, "current frame index");
    flo->add_option("--dst", f_dst, "reference frame index");
    flo->add_option("--output", f_out, "output .flo path");

    CLI11_PARSE(app, argc, argv);

    if (enc->parsed()) {
        if (!cfg_path.empty()) apply_config_file(cfg, cfg_path);
        if (lambda > 0) cfg.lambda = lambda;
        if (!gop_name.empty()) cfg.gop_id = gop_id_of(gop_name);
        if (paper_scale) {
            cfg.iters_pretrain = 10000;
            cfg.iters_frame = 10000;
            cfg.iters_joint = 100000;
        }
        if (it_pre >= 0) cfg.iters_pretrain = it_pre;
        if (it_frame >= 0) cfg.iters_frame = it_frame;
        if (it_joint >= 0) cfg.iters_joint = it_joint;
        if (seed_set) cfg.seed = seed;
        if (skip_pretrain) cfg.pretrain = false;
        if (skip_joint) cfg.joint = false;
        if (!flow_source_name.empty())
            cfg.flow_source = flow_source_name == "flo-dir" ? ovc::FlowSource::FloDir
                                                            : ovc::FlowSource::Builtin;
        if (!flow_dir.empty()) cfg.flow_dir = flow_dir;
        ovc::VideoBuffer vb = ovc::read_video(in_path, width, height, depth, frames);
        ovc::EncodeResult res = ovc::encode_video(vb.frames, cfg);
        write_file(out_path, res.bitstream);
        if (!report_path.empty()) {
            std::ofstream out(report_path);
            out << report_to_json(res.report).dump(2) << "\n";
        }
        if (!rates_path.empty()) write_rates_tsv(rates_path, res.report);
        if (!recon_path.empty()) ovc::write_yuv(recon_path, res.recon);
        if (!rd_append.empty()) {
            const bool fresh = !std::ifstream(rd_append).good();
            std::ofstream out(rd_append, std::ios::app);
            if (fresh) out << "rate_bpp\tpsnr_db\n";
            out << res.report.bpp << '\t' << res.report.psnr_db << '\n';
        }
        std::cout << "frames " << res.report.frame_count << "  bytes " << res.bitstream.size()
                  << "  bpp " << res.report.bpp << "  psnr_yuv420 " << res.report.psnr_db << " dB\n";
        return 0;
    }
    if (dec->parsed()) {
        const auto bytes = read_file(d_in);
        ovc::DecodeResult res = ovc::decode_gop(bytes.data(), bytes.size());
        if (d_y4m) {
            ovc::VideoBuffer vb;
            vb.w = res.header.w;
            vb.h = res.header.h;
            vb.depth = res.header.depth;
            vb.frames = std::move(res.frames);
            ovc::write_y4m(d_out, vb);
        } else {
            ovc::write_yuv(d_out, res.frames);
        }
        std::cout << "decoded " << res.header.frame_count << " frames " << res.header.w << "x"
                  << res.header.h << "\n";
        return 0;
    }
    if (met->parsed()) {
        ovc::VideoBuffer ref = ovc::read_video(m_ref, m_w, m_h, m_depth, m_frames);
        ovc::VideoBuffer test = ovc::read_video(m_test, m_w, m_h, m_depth, m_frames);
        if (ref.frames.size() != test.frames.size())
            throw ovc::metric_error("frame counts differ");
        const double p = m_domain == "rgb" ? ovc::psnr_rgb(ref.frames, test.frames)
                                           : ovc::psnr_yuv420(ref.frames, test.frames);
        std::cout << "psnr_" << m_domain << " " << p << " dB\n";
        for (size_t i = 0; i < ref.frames.size(); ++i) {
            const double pf = m_domain == "rgb" ? ovc::psnr_rgb({ref.frames[i]}, {test.frames[i]})
                                                : ovc::psnr_yuv420({ref.frames[i]}, {test.frames[i]});
            std::cout << "frame " << i << " psnr " << pf << " dB\n";
        }
        if (!m_bitstream.empty()) {
            const auto bytes = read_file(m_bitstream);
            const double bpp = static_cast<double>(bytes.size()) * 8.0 /
                               (static_cast<double>(ref.w) * ref.h * ref.frames.size());
            std::cout << "bpp " << bpp << "\n";
        }
        return 0;
    }
    if (bdr->parsed()) {
        const double bd = ovc::bd_rate(read_rd_tsv(b_anchor), read_rd_tsv(b_test));
        std::cout << "bd_rate " << bd << " %\n";
        return 0;
    }
    if (aud->parsed()) {
        const auto gop = ovc::GopStructure::make(gop_id_of(a_gop), a_frames);
        const auto a = ovc::mac_audit(a_h, a_w, gop);
        std::cout << "intra " << a.intra << " MAC/pixel\n";
        std::cout << "residue " << a.residue << " MAC/pixel\n";
        std::cout << "motion_p " << a.motion_p << " MAC/pixel\n";
        std::cout << "motion_b " << a.motion_b << " MAC/pixel\n";
        for (size_t i = 0; i < gop.decode_order.size(); ++i)
            std::cout << "frame " << gop.decode_order[i].display_idx << " ("
                      << ovc::frame_kind_letter(gop.decode_order[i].kind) << ") " << a.per_frame[i]
                      << " MAC/pixel\n";
        std::cout << "gop_average " << a.gop_average << " MAC/pixel\n";
        return 0;
    }
    if (flo->parsed()) {
        ovc::VideoBuffer vb = ovc::read_video(f_in, f_w, f_h, f_depth, -1);
        if (f_src < 0 || f_dst < 0 || f_src >= static_cast<int>(vb.frames.size()) ||
            f_dst >= static_cast<int>(vb.frames.size()))
            throw ovc::config_error("frame index out of range");
        const ovc::FlowField f = ovc::estimate_flow(vb.frames[f_src], vb.frames[f_dst]);
        ovc::write_flo(f_out, f);
        std::cout << "wrote " << f_out << " (" << f.w << "x" << f.h << ")\n";
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
