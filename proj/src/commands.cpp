#include "tiltxter/commands.hpp"

#include <cstdlib>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tiltxter/checkpoint.hpp"
#include "tiltxter/episode.hpp"
#include "tiltxter/manifest.hpp"
#include "tiltxter/render.hpp"
#include "tiltxter/train.hpp"
#include "tiltxter/transport.hpp"

namespace tiltxter::cli {

namespace {

using nlohmann::json;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

void setup_logging() {
    auto logger = spdlog::get("tiltxter");
    if (!logger) {
        logger = spdlog::stderr_color_mt("tiltxter");
        spdlog::set_default_logger(logger);
    }
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    const char* env = std::getenv("TILTXTER_LOG");
    const std::string level = env ? env : "info";
    if (level == "error")
        spdlog::set_level(spdlog::level::err);
    else if (level == "debug")
        spdlog::set_level(spdlog::level::debug);
    else {
        spdlog::set_level(spdlog::level::info);
        if (level != "info") spdlog::warn("TILTXTER_LOG='{}' not recognized, using info", level);
    }
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write file: " + path);
    return f;
}

void print_confusion(std::ostream& out, const nn::Confusion& c) {
    out << "confusion (rows = true, cols = predicted, deg)\n      ";
    for (int d : TiltClass::kDegrees) out << std::setw(6) << d;
    out << '\n';
    for (std::size_t i = 0; i < c.size(); ++i) {
        out << std::setw(6) << TiltClass::kDegrees[i];
        for (auto v : c[i]) out << std::setw(6) << v;
        out << '\n';
    }
}

void write_confusion_csv(const std::string& path, const nn::Confusion& c) {
    auto f = open_out(path);
    f << "true_deg";
    for (int d : TiltClass::kDegrees) f << ",pred_" << d;
    f << '\n';
    for (std::size_t i = 0; i < c.size(); ++i) {
        f << TiltClass::kDegrees[i];
        for (auto v : c[i]) f << ',' << v;
        f << '\n';
    }
}

json confusion_json(const nn::Confusion& c) {
    auto rows = json::array();
    for (const auto& r : c) rows.push_back(r);
    return rows;
}

/// +-90 diagnostic: share of 90-class errors that land on the opposite 90.
struct NinetyDiagnostic {
    std::uint32_t errors = 0;
    std::uint32_t onto_opposite = 0;
    double share() const { return errors ? double(onto_opposite) / errors : 1.0; }
};

NinetyDiagnostic ninety_diagnostic(const nn::Confusion& c) {
    NinetyDiagnostic d;
    const std::size_t lo = 0, hi = TiltClass::kCount - 1;
    for (std::size_t t : {lo, hi}) {
        for (std::size_t p = 0; p < c.size(); ++p) {
            if (p == t) continue;
            d.errors += c[t][p];
            if (p == (t == lo ? hi : lo)) d.onto_opposite += c[t][p];
        }
    }
    return d;
}

std::vector<sim::DatasetRecord> select_split(const std::vector<sim::DatasetRecord>& all, const std::string& which,
                                             std::uint64_t seed) {
    if (which == "all") return all;
    auto s = sim::split_dataset(all, seed);
    if (which == "train") return std::move(s.train);
    if (which == "val") return std::move(s.val);
    return std::move(s.test);
}

// ---------------------------------------------------------------------------

struct GenDatasetOpts {
    std::string out;
    std::uint64_t seed = 1;
    int reps = sim::kDefaultRepsPerCell;
    double noise = 0.15;
};

int cmd_gen_dataset(const GenDatasetOpts& o, std::ostream& out) {
    sim::ContactParams p;
    p.noise_sigma = o.noise;
    p.rng_seed = o.seed;
    p.validate();
    if (o.reps < 1) throw DomainError("--reps must be at least 1");
    auto records = sim::gen_dataset(p, o.reps);
    sim::quantize_in_place(records);
    sim::save_dataset(o.out, records);

    RunManifest m;
    m.command = "gen-dataset";
    m.config = {{"reps", o.reps},
                {"noise_sigma", p.noise_sigma},
                {"offset_jitter", p.offset_jitter},
                {"base_width", p.base_width},
                {"width_gain", p.width_gain},
                {"force_at_min", p.force_gain.at_min_closure},
                {"force_at_max", p.force_gain.at_max_closure}};
    m.seeds = {{"seed", o.seed}};
    m.outputs.push_back(digest_file(o.out));
    m.results = {{"records", records.size()}};
    write_manifest(m, o.out);
    out << "wrote " << records.size() << " records to " << o.out << '\n';
    return kExitOk;
}

struct TrainOpts {
    std::string data, out, curve;
    int epochs = 50;
    std::uint64_t seed = 1;
    std::size_t batch = 64;
    double lr = 0.01;
};

int cmd_train(const TrainOpts& o, std::ostream& out) {
    const auto records = sim::load_dataset(o.data);
    const auto split = sim::split_dataset(records, o.seed);
    nn::TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.lr = o.lr;
    cfg.seed = o.seed;
    cfg.validate();

    const std::string curve_path = o.curve.empty() ? o.out + ".curve.csv" : o.curve;
    auto curve = open_out(curve_path);
    curve << "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    out << "records: train " << split.train.size() << ", val " << split.val.size() << ", test "
        << split.test.size() << '\n';
    out << "epoch  train_loss  train_acc  val_loss  val_acc  lr\n";
    auto result = nn::train(nn::Model(nn::ModelSpec::tilt_default(), o.seed), split.train, split.val, cfg,
                            [&](const nn::EpochStats& e) {
                                curve << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss
                                      << ',' << e.val_acc << ',' << e.lr << '\n';
                                out << std::setw(5) << e.epoch << std::setw(12) << fixed(e.train_loss)
                                    << std::setw(11) << fixed(e.train_acc) << std::setw(10) << fixed(e.val_loss)
                                    << std::setw(9) << fixed(e.val_acc) << "  " << e.lr << '\n';
                                out.flush();
                            });
    curve.close();
    nn::save_checkpoint(o.out, result.model);

    const auto test = nn::evaluate(result.model, split.test);
    const auto diag = ninety_diagnostic(test.confusion);
    out << "best epoch " << result.report.best_epoch << " (val acc " << fixed(result.report.best_val_acc) << ")\n";
    out << "test accuracy " << fixed(test.accuracy) << ", orientation accuracy (+-90 merged) "
        << fixed(nn::orientation_accuracy(test.confusion)) << '\n';
    out << "+-90 errors landing on the opposite 90 class: " << diag.onto_opposite << " of " << diag.errors << '\n';
    print_confusion(out, test.confusion);

    RunManifest m;
    m.command = "train";
    m.config = {{"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"lr", cfg.lr},
                {"momentum", cfg.momentum},
                {"plateau",
                 {{"factor", cfg.plateau.factor},
                  {"patience", cfg.plateau.patience},
                  {"min_lr", cfg.plateau.min_lr},
                  {"threshold", cfg.plateau.threshold}}}};
    m.seeds = {{"seed", o.seed}};
    m.inputs.push_back(digest_file(o.data));
    m.outputs.push_back(digest_file(o.out));
    m.outputs.push_back(digest_file(curve_path));
    m.results = {{"best_epoch", result.report.best_epoch},
                 {"best_val_acc", result.report.best_val_acc},
                 {"test_accuracy", test.accuracy},
                 {"test_orientation_accuracy", nn::orientation_accuracy(test.confusion)},
                 {"test_confusion", confusion_json(test.confusion)}};
    write_manifest(m, o.out);
    return kExitOk;
}

struct EvalOpts {
    std::string data, ckpt, split = "all", csv;
    std::uint64_t seed = 1;
};

int cmd_eval(const EvalOpts& o, std::ostream& out) {
    const auto records = sim::load_dataset(o.data);
    const auto set = select_split(records, o.split, o.seed);
    nn::Model model = o.ckpt.empty() ? nn::Model(nn::ModelSpec::tilt_default(), o.seed) : nn::load_checkpoint(o.ckpt);
    if (o.ckpt.empty()) out << "no checkpoint given: evaluating an untrained model (seed " << o.seed << ")\n";
    const auto r = nn::evaluate(model, set);
    out << "records " << r.count << " (" << o.split << ")\n";
    out << "accuracy " << fixed(r.accuracy) << ", loss " << fixed(r.loss) << ", orientation accuracy (+-90 merged) "
        << fixed(nn::orientation_accuracy(r.confusion)) << '\n';
    print_confusion(out, r.confusion);
    if (!o.csv.empty()) {
        write_confusion_csv(o.csv, r.confusion);
        RunManifest m;
        m.command = "eval";
        m.config = {{"split", o.split}};
        m.seeds = {{"seed", o.seed}};
        m.inputs.push_back(digest_file(o.data));
        if (!o.ckpt.empty()) m.inputs.push_back(digest_file(o.ckpt));
        m.outputs.push_back(digest_file(o.csv));
        m.results = {{"accuracy", r.accuracy}, {"loss", r.loss}, {"confusion", confusion_json(r.confusion)}};
        write_manifest(m, o.csv);
    }
    return kExitOk;
}

struct RenderOpts {
    std::string ckpt, in, mode = "pattern", out;
};

int cmd_render(const RenderOpts& o, std::ostream& out) {
    const auto mode = parse_feedback_mode(o.mode);
    const auto records = sim::load_dataset(o.in);
    std::optional<nn::Model> model;
    if (!o.ckpt.empty()) model = nn::load_checkpoint(o.ckpt);
    if (mode == FeedbackMode::CnnPattern && !model) throw DomainError("pattern mode needs --ckpt");

    auto f = open_out(o.out);
    f << "record,finger";
    for (int i = 0; i < 20; ++i) f << ",e" << i;
    f << ",predicted\n";
    for (const auto& r : records) {
        const auto ff = render::render_feedback(mode, r.biframe, model ? &*model : nullptr);
        const std::string pred = ff.predicted ? std::to_string(ff.predicted->degrees()) : "";
        auto row = [&](const char* finger, const ElectrodeFrame& e) {
            f << r.sample_id << ',' << finger;
            for (auto v : e.intensities.cells) f << ',' << int(v);
            f << ',' << pred << '\n';
        };
        row("left", ff.left);
        row("right", ff.right);
    }
    f.close();

    RunManifest m;
    m.command = "render";
    m.config = {{"mode", std::string(to_string(mode))}};
    m.inputs.push_back(digest_file(o.in));
    if (!o.ckpt.empty()) m.inputs.push_back(digest_file(o.ckpt));
    m.outputs.push_back(digest_file(o.out));
    m.results = {{"records", records.size()}};
    write_manifest(m, o.out);
    out << "rendered " << records.size() << " records (" << to_string(mode) << ") to " << o.out << '\n';
    return kExitOk;
}

struct ServeRemoteOpts {
    std::string listen = "127.0.0.1:7700";
    std::uint64_t seed = 1;
    double holder_tilt = 90.0;
    double initial_orientation = 0.0;
    std::uint64_t ticks = 0;
};

int cmd_serve_remote(const ServeRemoteOpts& o, std::ostream& out) {
    net::RemoteServeConfig cfg;
    cfg.listen = net::parse_endpoint(o.listen);
    cfg.node.holder_tilt_deg = o.holder_tilt;
    cfg.node.initial_orientation_deg = o.initial_orientation;
    cfg.node.contact.rng_seed = o.seed;
    cfg.max_ticks = o.ticks;
    if (o.holder_tilt < -90.0 || o.holder_tilt > 90.0) throw DomainError("--holder-tilt must be within [-90, 90]");

    net::RemoteServer server(cfg);
    server.start();
    out << "remote node listening on " << cfg.listen.host << ':' << server.port() << '\n';
    out.flush();
    while (!g_interrupted && !server.stopped() && (o.ticks == 0 || server.ticks() < o.ticks))
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    server.wait();
    out << "ticks " << server.ticks() << ", commands " << server.commands() << ", overruns " << server.overruns()
        << '\n';
    if (const auto g = server.last_grasp())
        out << "last grasp: relative angle " << fixed(g->relative_deg, 1) << " deg, "
            << (g->success ? "success" : "miss") << '\n';
    return kExitOk;
}

void print_latency(std::ostream& out, const net::LatencyStats& s) {
    out << "stage            p50_us     p90_us     p99_us     max_us\n";
    for (std::size_t i = 0; i < static_cast<std::size_t>(net::Stage::Count); ++i) {
        const auto st = static_cast<net::Stage>(i);
        out << std::left << std::setw(12) << net::stage_name(st) << std::right;
        for (double q : {50.0, 90.0, 99.0, 100.0}) out << std::setw(11) << fixed(s.percentile(st, q), 1);
        out << '\n';
    }
}

struct ServeLocalOpts {
    std::string connect = "127.0.0.1:7700", ckpt, mode = "pattern", mirror;
    std::uint64_t ticks = 0;
};

int cmd_serve_local(const ServeLocalOpts& o, std::ostream& out) {
    net::LocalServeConfig cfg;
    cfg.remote = net::parse_endpoint(o.connect);
    cfg.node.mode = parse_feedback_mode(o.mode);
    if (!o.ckpt.empty()) cfg.node.model = std::make_shared<const nn::Model>(nn::load_checkpoint(o.ckpt));
    if (cfg.node.mode == FeedbackMode::CnnPattern && !cfg.node.model)
        spdlog::warn("pattern mode without --ckpt: every tick will be a fault");
    if (!o.mirror.empty()) cfg.mirror = net::parse_endpoint(o.mirror);
    cfg.max_ticks = o.ticks;

    net::LocalClient client(cfg);
    client.start();
    if (auto p = client.mirror_port()) out << "JSON mirror on " << cfg.mirror->host << ':' << *p << '\n';
    out.flush();
    while (!g_interrupted && !client.stopped() && (o.ticks == 0 || client.ticks() < o.ticks))
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    client.stop();
    client.wait();
    out << "ticks " << client.ticks() << ", electrode frames " << client.electrodes() << ", stale frames dropped "
        << client.stale_dropped() << ", overruns " << client.overruns() << ", faults " << client.faults() << '\n';
    print_latency(out, client.stats());
    return kExitOk;
}

struct BenchOpts {
    int ticks = 1000;
    std::string mode = "pattern", ckpt, csv;
    std::uint64_t seed = 1;
    bool paced = false;
};

int cmd_bench(const BenchOpts& o, std::ostream& out) {
    if (o.ticks < 1) throw DomainError("--ticks must be positive");
    const auto mode = parse_feedback_mode(o.mode);
    std::shared_ptr<const nn::Model> model;
    if (!o.ckpt.empty())
        model = std::make_shared<const nn::Model>(nn::load_checkpoint(o.ckpt));
    else if (mode == FeedbackMode::CnnPattern) {
        // Latency does not depend on the weights.
        model = std::make_shared<const nn::Model>(nn::ModelSpec::tilt_default(), o.seed);
        out << "no checkpoint given: timing an untrained model\n";
    }

    net::RemoteConfig rc;
    rc.contact.rng_seed = o.seed;
    net::RemoteNode remote(rc);
    net::LocalNode local({mode, model});
    std::vector<std::vector<std::uint8_t>> frames;
    frames.reserve(static_cast<std::size_t>(o.ticks));
    for (int i = 0; i < o.ticks; ++i) {
        wire::Command sweep;
        sweep.target_tilt_deg = static_cast<std::int16_t>(i % 120 < 60 ? 90 : -90);
        sweep.gripper_pos = static_cast<std::uint8_t>(i % (kMaxGripperPos + 1));
        sweep.mode = mode;
        frames.push_back(wire::encode_msg(remote.tick(sweep, static_cast<std::uint64_t>(i) * 16'667)));
    }

    std::size_t i = 0;
    if (o.paced) {
        net::FixedRateLoop loop(net::kTickPeriod);
        loop.run([&] {
            local.tick_bytes(frames[i]);
            return ++i < frames.size();
        });
        out << "paced at 60 Hz, overruns " << loop.overruns() << '\n';
    } else {
        for (; i < frames.size(); ++i) local.tick_bytes(frames[i]);
    }

    const auto& s = local.stats();
    out << "local tick latency over " << o.ticks << " ticks, mode " << to_string(mode) << '\n';
    print_latency(out, s);
    const double p99_ms = s.percentile(net::Stage::Total, 99.0) / 1000.0;
    const double budget_ms = 1000.0 / net::kTickHz;
    out << "p99 total " << fixed(p99_ms, 3) << " ms vs budget " << fixed(budget_ms, 3) << " ms: "
        << (p99_ms < budget_ms ? "within budget" : "OVER BUDGET") << '\n';
    if (!o.csv.empty()) {
        auto f = open_out(o.csv);
        f << "stage,p50_us,p90_us,p99_us,max_us\n";
        for (std::size_t k = 0; k < static_cast<std::size_t>(net::Stage::Count); ++k) {
            const auto st = static_cast<net::Stage>(k);
            f << net::stage_name(st) << ',' << s.percentile(st, 50) << ',' << s.percentile(st, 90) << ','
              << s.percentile(st, 99) << ',' << s.percentile(st, 100) << '\n';
        }
    }
    return kExitOk;
}

struct EpisodeOpts {
    std::string agent = "noisy", mode = "all", ckpt, csv;
    int trials = 64;
    std::uint64_t seed = 1;
    double holder_tilt = 90.0;
};

int cmd_episode(const EpisodeOpts& o, std::ostream& out) {
    const auto kind = net::parse_agent_kind(o.agent);
    if (o.trials < 1) throw DomainError("--trials must be positive");
    std::vector<FeedbackMode> modes;
    if (o.mode == "all")
        modes = {FeedbackMode::CnnPattern, FeedbackMode::Downsized, FeedbackMode::None};
    else
        modes = {parse_feedback_mode(o.mode)};
    std::shared_ptr<const nn::Model> model;
    if (!o.ckpt.empty()) model = std::make_shared<const nn::Model>(nn::load_checkpoint(o.ckpt));

    std::ofstream csv;
    if (!o.csv.empty()) {
        csv = open_out(o.csv);
        csv << "agent,mode,trials,successes,success_rate,mean_ticks\n";
    }
    out << "agent " << o.agent << ", " << o.trials << " trials per mode, holder tilt " << o.holder_tilt << " deg\n";
    out << "mode        success  rate    mean_ticks\n";
    for (auto mode : modes) {
        if (mode == FeedbackMode::CnnPattern && !model) throw DomainError("pattern mode needs --ckpt");
        net::AgentConfig acfg;
        acfg.mode = mode;
        const auto s = net::run_trials(kind, acfg, o.trials, o.seed, model, {}, o.holder_tilt);
        out << std::left << std::setw(12) << to_string(mode) << std::right << std::setw(3) << s.successes << '/'
            << std::left << std::setw(5) << s.trials << std::right << fixed(s.success_rate(), 3) << std::setw(10)
            << fixed(s.mean_ticks, 1) << '\n';
        if (csv)
            csv << o.agent << ',' << to_string(mode) << ',' << s.trials << ',' << s.successes << ','
                << s.success_rate() << ',' << s.mean_ticks << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    setup_logging();
    CLI::App app{"tiltxter: tactile tilt classification and electro-tactile feedback toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GenDatasetOpts gen;
    auto* c_gen = app.add_subcommand("gen-dataset", "Generate a synthetic labelled dataset");
    c_gen->add_option("--out", gen.out, "Output dataset file")->required();
    c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    c_gen->add_option("--reps", gen.reps, "Samples per (class, closure) cell")->capture_default_str();
    c_gen->add_option("--noise", gen.noise, "Per-taxel noise sigma in N")->capture_default_str();

    TrainOpts tr;
    auto* c_train = app.add_subcommand("train", "Train the tilt classifier");
    c_train->add_option("--data", tr.data, "Dataset file")->required();
    c_train->add_option("--out", tr.out, "Output checkpoint")->required();
    c_train->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    c_train->add_option("--seed", tr.seed, "Seed for split, init and shuffling")->capture_default_str();
    c_train->add_option("--batch", tr.batch, "Mini-batch size")->capture_default_str();
    c_train->add_option("--lr", tr.lr, "Initial learning rate")->capture_default_str();
    c_train->add_option("--curve", tr.curve, "Learning-curve CSV (default <out>.curve.csv)");

    EvalOpts ev;
    auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    c_eval->add_option("--data", ev.data, "Dataset file")->required();
    c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint (omit to evaluate an untrained model)");
    c_eval->add_option("--split", ev.split, "Records to use")
        ->check(CLI::IsMember({"all", "train", "val", "test"}))
        ->capture_default_str();
    c_eval->add_option("--seed", ev.seed, "Split seed (and init seed without --ckpt)")->capture_default_str();
    c_eval->add_option("--csv", ev.csv, "Write the confusion matrix as CSV");

    RenderOpts rd;
    auto* c_render = app.add_subcommand("render", "Render electrode frames for every dataset record");
    c_render->add_option("--ckpt", rd.ckpt, "Checkpoint (required for pattern mode)");
    c_render->add_option("--in", rd.in, "Dataset file")->required();
    c_render->add_option("--mode", rd.mode, "none | downsize | pattern")->capture_default_str();
    c_render->add_option("--out", rd.out, "Output CSV")->required();

    ServeRemoteOpts sr;
    auto* c_sr = app.add_subcommand("serve-remote", "Run the simulated remote rig");
    c_sr->add_option("--listen", sr.listen, "Listen address host:port")->capture_default_str();
    c_sr->add_option("--seed", sr.seed, "Sensor simulation seed")->capture_default_str();
    c_sr->add_option("--holder-tilt", sr.holder_tilt, "Pipette holder tilt in deg")->capture_default_str();
    c_sr->add_option("--initial-orientation", sr.initial_orientation, "Initial TCP orientation in deg")
        ->capture_default_str();
    c_sr->add_option("--ticks", sr.ticks, "Stop after this many ticks (0 = run until interrupted)")
        ->capture_default_str();

    ServeLocalOpts sl;
    auto* c_sl = app.add_subcommand("serve-local", "Run the local rendering node");
    c_sl->add_option("--connect", sl.connect, "Remote node address host:port")->capture_default_str();
    c_sl->add_option("--ckpt", sl.ckpt, "Checkpoint for pattern mode");
    c_sl->add_option("--mode", sl.mode, "none | downsize | pattern")->capture_default_str();
    c_sl->add_option("--mirror", sl.mirror, "Serve the JSON mirror (WebSocket) on host:port");
    c_sl->add_option("--ticks", sl.ticks, "Stop after this many ticks (0 = run until interrupted)")
        ->capture_default_str();

    BenchOpts bn;
    auto* c_bench = app.add_subcommand("bench", "Time the local tick pipeline");
    c_bench->add_option("--ticks", bn.ticks, "Number of ticks")->capture_default_str();
    c_bench->add_option("--mode", bn.mode, "none | downsize | pattern")->capture_default_str();
    c_bench->add_option("--ckpt", bn.ckpt, "Checkpoint (optional; weights do not affect timing)");
    c_bench->add_option("--seed", bn.seed, "Seed for the simulated input")->capture_default_str();
    c_bench->add_flag("--paced", bn.paced, "Run at the 60 Hz tick rate instead of back to back");
    c_bench->add_option("--csv", bn.csv, "Write percentiles as CSV");

    EpisodeOpts ep;
    auto* c_ep = app.add_subcommand("episode", "Run scripted closed-loop grasp episodes");
    c_ep->add_option("--agent", ep.agent, "oracle | blind | noisy")
        ->check(CLI::IsMember({"oracle", "blind", "noisy"}))
        ->capture_default_str();
    c_ep->add_option("--trials", ep.trials, "Episodes per mode")->capture_default_str();
    c_ep->add_option("--mode", ep.mode, "none | downsize | pattern | all")->capture_default_str();
    c_ep->add_option("--ckpt", ep.ckpt, "Checkpoint (required for pattern mode)");
    c_ep->add_option("--seed", ep.seed, "Seed for offsets, sensor noise and perception")->capture_default_str();
    c_ep->add_option("--holder-tilt", ep.holder_tilt, "Pipette holder tilt in deg")->capture_default_str();
    c_ep->add_option("--csv", ep.csv, "Write success rates as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        if (*c_gen) return cmd_gen_dataset(gen, out);
        if (*c_train) return cmd_train(tr, out);
        if (*c_eval) return cmd_eval(ev, out);
        if (*c_render) return cmd_render(rd, out);
        if (*c_sr) return cmd_serve_remote(sr, out);
        if (*c_sl) return cmd_serve_local(sl, out);
        if (*c_bench) return cmd_bench(bn, out);
        if (*c_ep) return cmd_episode(ep, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    }
    return kExitUsage;
}

}  // namespace tiltxter::cli
