#include "scenegen/cli/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "scenegen/eval/report.hpp"
#include "scenegen/sample/sampler.hpp"
#include "scenegen/synth/corpus.hpp"
#include "scenegen/train/trainer.hpp"
#include "scenegen/util/sha256.hpp"

namespace scenegen {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------ plumbing

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stable per-scene seed stream: independent of generation order, so the
// corpus is byte-identical no matter how many workers ran.
uint64_t scene_seed(uint64_t run_seed, uint64_t index) {
    return splitmix64(run_seed ^ splitmix64(index + 1));
}

template <typename F>
void parallel_for(int n, int workers, F&& f) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ------------------------------------------------------------ config files

const std::set<std::string> kTopKeys = {"model", "synth", "train", "gen", "sample", "eval"};
const std::set<std::string> kModelKeys = {
    "dim",         "heads",      "blocks",   "lat_res",         "registers",
    "freq_dim",    "ffn_mult",   "view_size", "patch",          "view_layers",
    "geo_layers",  "max_views",  "pos_head_layers", "decoder_hidden"};
const std::set<std::string> kSynthKeys = {
    "lat_res",   "surface_samples", "view_size",       "views",     "max_assets",
    "collision_res", "max_layout_tries", "min_scale",  "max_scale", "placement_range",
    "min_gap"};
const std::set<std::string> kTrainKeys = {
    "lr",        "weight_decay", "batch_size",  "epochs",        "lambda_floor",
    "lambda_decay", "mu_t",      "mu_q",        "mu_s",          "delta_p",
    "delta_c",   "cond_dropout_p", "seed",      "trainable",     "drop_geo",
    "drop_global_v", "drop_mask", "ss_to_as",   "collision_res", "collision_temp"};
const std::set<std::string> kGenKeys = {"scenes", "min_assets", "max_assets", "augment"};
const std::set<std::string> kSampleKeys = {"steps", "cfg_weight", "latent_fusion"};
const std::set<std::string> kEvalKeys = {"registration", "tau",       "eval_points",
                                         "reg_points",   "sigma_init", "max_iters",
                                         "tol",          "collision_res", "multi_start"};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    if (!j.is_object()) throw FormatError("config: " + where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw FormatError("config: unknown key '" + it.key() + "' in " + where);
}

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream is(path);
    if (!is) throw FormatError("config: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("config: " + path + " is not valid JSON: " + e.what());
    }
    reject_unknown(j, kTopKeys, "top level");
    const std::map<std::string, const std::set<std::string>*> sections = {
        {"model", &kModelKeys}, {"synth", &kSynthKeys}, {"train", &kTrainKeys},
        {"gen", &kGenKeys},     {"sample", &kSampleKeys}, {"eval", &kEvalKeys}};
    for (const auto& [name, keys] : sections)
        if (j.contains(name)) reject_unknown(j[name], *keys, "section '" + name + "'");
    return j;
}

nlohmann::json section(const nlohmann::json& cfg, const std::string& name) {
    return cfg.contains(name) ? cfg[name] : nlohmann::json::object();
}

SynthConfig synth_from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.lat_res = j.value("lat_res", c.lat_res);
    c.surface_samples = j.value("surface_samples", c.surface_samples);
    c.view_size = j.value("view_size", c.view_size);
    c.views = j.value("views", c.views);
    c.max_assets = j.value("max_assets", c.max_assets);
    c.collision_res = j.value("collision_res", c.collision_res);
    c.max_layout_tries = j.value("max_layout_tries", c.max_layout_tries);
    c.min_scale = j.value("min_scale", c.min_scale);
    c.max_scale = j.value("max_scale", c.max_scale);
    c.placement_range = j.value("placement_range", c.placement_range);
    c.min_gap = j.value("min_gap", c.min_gap);
    return c;
}

nlohmann::json synth_to_json(const SynthConfig& c) {
    return {{"lat_res", c.lat_res},
            {"surface_samples", c.surface_samples},
            {"view_size", c.view_size},
            {"views", c.views},
            {"max_assets", c.max_assets},
            {"collision_res", c.collision_res},
            {"max_layout_tries", c.max_layout_tries},
            {"min_scale", c.min_scale},
            {"max_scale", c.max_scale},
            {"placement_range", c.placement_range},
            {"min_gap", c.min_gap}};
}

EvalConfig eval_from_json(const nlohmann::json& j) {
    EvalConfig c;
    c.registration = j.value("registration", c.registration);
    c.tau = j.value("tau", c.tau);
    c.eval_points = j.value("eval_points", c.eval_points);
    c.reg_points = j.value("reg_points", c.reg_points);
    c.sigma_init = j.value("sigma_init", c.sigma_init);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.tol = j.value("tol", c.tol);
    c.collision_res = j.value("collision_res", c.collision_res);
    c.multi_start = j.value("multi_start", c.multi_start);
    SG_CHECK(c.registration == "filterreg" || c.registration == "icp",
             "config: eval.registration must be filterreg or icp");
    return c;
}

// ------------------------------------------------------------ manifests

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    SG_CHECK(os.good(), "cannot write " + path);
    os << text;
}

// Every run is self-describing: the resolved config plus content hashes of
// inputs and outputs. No timestamps, so reruns are byte-identical.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const nlohmann::json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    nlohmann::json m;
    m["command"] = command;
    m["config"] = config;
    nlohmann::json in = nlohmann::json::object();
    for (const std::string& p : inputs) in[p] = sha256_file(p);
    m["inputs"] = in;
    nlohmann::json out = nlohmann::json::object();
    for (const std::string& p : outputs)
        out[fs::relative(p, out_dir).string()] = sha256_file(p);
    m["outputs"] = out;
    write_text(out_dir + "/manifest.json", m.dump(2) + "\n");
}

SceneGenModel load_model_from(const std::string& ckpt) {
    const std::string path =
        fs::is_directory(ckpt) ? ckpt + "/weights.sgck" : ckpt;
    const Checkpoint ck = load_checkpoint(path);
    if (!ck.meta.contains("model"))
        throw FormatError("checkpoint: " + path + " has no model config");
    SceneGenModel m = SceneGenModel::create(ModelConfig::from_json(ck.meta["model"]), 0);
    m.load_weights(ck);
    return m;
}

std::string scene_dir_name(uint64_t scene_id) {
    return "scene_" + std::to_string(scene_id);
}

std::vector<std::string> list_files(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

// ------------------------------------------------------------ gen-data

struct GenArgs {
    std::string config, out;
    uint64_t seed = 0;
    int scenes = -1, min_assets = -1, max_assets = -1, views = -1;
    bool augment = false;
};

int cmd_gen_data(const GenArgs& a) {
    const nlohmann::json file_cfg = load_config(a.config);
    SynthConfig synth = synth_from_json(section(file_cfg, "synth"));
    const nlohmann::json gen = section(file_cfg, "gen");
    const int scenes = a.scenes > 0 ? a.scenes : gen.value("scenes", 16);
    const int min_assets = a.min_assets > 0 ? a.min_assets : gen.value("min_assets", 2);
    const int max_assets = a.max_assets > 0 ? a.max_assets : gen.value("max_assets", 4);
    const bool augment = a.augment || gen.value("augment", false);
    if (a.views > 0) synth.views = a.views;
    SG_CHECK(1 <= min_assets && min_assets <= max_assets && max_assets <= synth.max_assets,
             "gen-data: need 1 <= min_assets <= max_assets <= synth.max_assets");

    fs::create_directories(a.out);
    std::vector<std::vector<SceneSample>> per_scene(static_cast<size_t>(scenes));
    parallel_for(scenes, worker_count(), [&](int i) {
        uint64_t sd = scene_seed(a.seed, static_cast<uint64_t>(i));
        const int n = Rng(sd).fork(1).uniform_int(min_assets, max_assets);
        SceneSample s;
        for (int attempt = 0;; ++attempt) {
            try {
                s = generate_scene(sd, n, synth);
                break;
            } catch (const GenerationError&) {
                if (attempt >= 32) throw;
                sd = splitmix64(sd + 1);
            }
        }
        if (augment) {
            Rng aug = Rng(sd).fork(2);
            per_scene[static_cast<size_t>(i)] = augment_query_rotation(s, aug);
        } else {
            per_scene[static_cast<size_t>(i)].push_back(std::move(s));
        }
    });

    std::vector<SceneSample> corpus;
    for (auto& group : per_scene)
        for (auto& s : group) corpus.push_back(std::move(s));
    const std::string corpus_path = a.out + "/corpus.sgcorp";
    nlohmann::json cfg = {{"seed", a.seed},
                          {"scenes", scenes},
                          {"min_assets", min_assets},
                          {"max_assets", max_assets},
                          {"augment", augment},
                          {"synth", synth_to_json(synth)}};
    save_corpus(corpus_path, corpus, cfg);
    write_manifest(a.out, "gen-data", cfg, a.config.empty() ? std::vector<std::string>{}
                                                            : std::vector<std::string>{a.config},
                   {corpus_path});
    std::cout << "wrote " << corpus.size() << " samples (" << scenes << " base scenes) to "
              << corpus_path << "\n";
    return 0;
}

// ------------------------------------------------------------ train-decoder

struct TrainDecoderArgs {
    std::string config, corpus, out;
    uint64_t seed = 0;
    int epochs = 40;
    double lr = 3e-3;
    double noise_std = 0.1;
};

int cmd_train_decoder(const TrainDecoderArgs& a) {
    const nlohmann::json file_cfg = load_config(a.config);
    const ModelConfig mc = ModelConfig::from_json(section(file_cfg, "model"));
    const std::vector<SceneSample> corpus = load_corpus(a.corpus);
    SG_CHECK(!corpus.empty(), "train-decoder: empty corpus");
    SG_CHECK(corpus[0].assets[0].latent.res == mc.agg.lat_res,
             "train-decoder: corpus lat_res does not match model lat_res");
    SG_CHECK(corpus[0].views.empty() || corpus[0].views[0].size == mc.enc.view_size,
             "train-decoder: corpus view size does not match model view_size");

    fs::create_directories(a.out);
    SceneGenModel model = SceneGenModel::create(mc, a.seed);
    std::ofstream log(a.out + "/decoder_log.jsonl", std::ios::binary);
    const real iou = train_decoder(model, corpus, a.epochs, static_cast<real>(a.lr),
                                   static_cast<real>(a.noise_std), a.seed, &log);
    log.close();

    const std::string wpath = a.out + "/weights.sgck";
    save_checkpoint(wpath, model.to_checkpoint("f8"));
    write_text(a.out + "/decoder.json",
               nlohmann::json{{"held_out_iou", iou}}.dump(2) + "\n");

    nlohmann::json cfg = {{"seed", a.seed},   {"epochs", a.epochs},
                          {"lr", a.lr},       {"noise_std", a.noise_std},
                          {"model", mc.to_json()}};
    write_manifest(a.out, "train-decoder", cfg, {a.corpus}, list_files(a.out));
    std::cout << "decoder held-out shell IoU: " << iou << "\n";
    return iou > real(0.9) ? 0 : 2;  // nonzero when pretraining missed its target
}

// ------------------------------------------------------------ train

struct TrainArgs {
    std::string config, corpus, out, resume, decoder_init;
    uint64_t seed = 0;
    bool seed_set = false;
    int epochs = -1;
};

int cmd_train(const TrainArgs& a) {
    const nlohmann::json file_cfg = load_config(a.config);
    const std::vector<SceneSample> corpus = load_corpus(a.corpus);
    SG_CHECK(!corpus.empty(), "train: empty corpus");

    fs::create_directories(a.out);
    std::unique_ptr<Trainer> trainer;
    if (!a.resume.empty()) {
        trainer = std::make_unique<Trainer>(Trainer::from_checkpoint(a.resume));
    } else {
        const ModelConfig mc = ModelConfig::from_json(section(file_cfg, "model"));
        TrainConfig tc = TrainConfig::from_json(section(file_cfg, "train"));
        if (a.seed_set) tc.seed = a.seed;
        if (a.epochs > 0) tc.epochs = a.epochs;
        SG_CHECK(corpus[0].assets[0].latent.res == mc.agg.lat_res,
                 "train: corpus lat_res does not match model lat_res");
        SG_CHECK(corpus[0].views.empty() || corpus[0].views[0].size == mc.enc.view_size,
                 "train: corpus view size does not match model view_size");
        SceneGenModel model = SceneGenModel::create(mc, tc.seed);
        if (!a.decoder_init.empty()) {
            const SceneGenModel pre = load_model_from(a.decoder_init);
            model.load_weights(pre.to_checkpoint("f8"));
        }
        trainer = std::make_unique<Trainer>(std::move(model), tc);
    }

    const int target_epochs = a.epochs > 0 ? a.epochs : trainer->config().epochs;
    std::ofstream log(a.out + "/log.jsonl",
                      a.resume.empty() ? std::ios::binary : std::ios::binary | std::ios::app);
    while (trainer->epoch() < target_epochs) {
        const auto recs = trainer->train_epoch(corpus, &log);
        log.flush();
        real mean_total = 0;
        for (const auto& r : recs) mean_total += r.loss.total;
        mean_total /= static_cast<real>(recs.size());
        std::cout << "epoch " << trainer->epoch() - 1 << " loss " << mean_total << " (lambda "
                  << recs.back().loss.lambda << ")\n";
        trainer->save_checkpoint(a.out + "/ckpt");
    }

    nlohmann::json cfg = {{"train", trainer->config().to_json()},
                          {"model", trainer->model().cfg.to_json()},
                          {"epochs", target_epochs}};
    write_manifest(a.out, "train", cfg, {a.corpus}, list_files(a.out));
    return 0;
}

// ------------------------------------------------------------ sample

struct SampleArgs {
    std::string config, ckpt, corpus, out, fusion;
    uint64_t seed = 0;
    int views = 1, steps = -1;
    double cfg_weight = -1;
    int64_t scene = -1;  // -1 = all scenes
};

SampleConfig resolve_sample_config(const SampleArgs& a, const nlohmann::json& file_cfg) {
    const nlohmann::json j = section(file_cfg, "sample");
    SampleConfig sc;
    sc.steps = a.steps > 0 ? a.steps : j.value("steps", sc.steps);
    sc.cfg_weight =
        a.cfg_weight >= 0 ? static_cast<real>(a.cfg_weight) : j.value("cfg_weight", sc.cfg_weight);
    sc.latent_fusion = !a.fusion.empty() ? a.fusion : j.value("latent_fusion", sc.latent_fusion);
    return sc;
}

int cmd_sample(const SampleArgs& a) {
    const nlohmann::json file_cfg = load_config(a.config);
    const SampleConfig base = resolve_sample_config(a, file_cfg);
    const SceneGenModel model = load_model_from(a.ckpt);
    const std::vector<SceneSample> corpus = load_corpus(a.corpus);
    SG_CHECK(!corpus.empty(), "sample: empty corpus");
    SG_CHECK(corpus[0].views.empty() || corpus[0].views[0].size == model.cfg.enc.view_size,
             "sample: corpus view size does not match checkpoint view_size");

    std::vector<int> view_ids(static_cast<size_t>(a.views));
    for (int k = 0; k < a.views; ++k) view_ids[static_cast<size_t>(k)] = k;

    fs::create_directories(a.out);
    int done = 0;
    for (size_t i = 0; i < corpus.size(); ++i) {
        if (a.scene >= 0 && static_cast<int64_t>(i) != a.scene) continue;
        const SceneSample& scene = corpus[i];
        SG_CHECK(a.views <= static_cast<int>(scene.views.size()),
                 "sample: scene has fewer rendered views than requested");
        SampleConfig sc = base;
        sc.seed = splitmix64(a.seed ^ splitmix64(scene.scene_id));
        const SampledScene s = sample_scene_multiview(model, scene, view_ids, sc);
        write_sampled_scene(a.out + "/" + scene_dir_name(scene.scene_id), s);
        ++done;
    }
    SG_CHECK(done > 0, "sample: no scene matched --scene");

    nlohmann::json cfg = {{"seed", a.seed},
                          {"views", a.views},
                          {"scene", a.scene},
                          {"sample", base.to_json()}};
    write_manifest(a.out, "sample", cfg, {a.corpus}, list_files(a.out));
    std::cout << "sampled " << done << " scenes to " << a.out << "\n";
    return 0;
}

// ------------------------------------------------------------ eval

struct EvalArgs {
    std::string config, pred, gt, out, registration;
    double tau = -1;
    bool markdown = false;
};

int cmd_eval(const EvalArgs& a) {
    const nlohmann::json file_cfg = load_config(a.config);
    EvalConfig ec = eval_from_json(section(file_cfg, "eval"));
    if (!a.registration.empty()) ec.registration = a.registration;
    if (a.tau > 0) ec.tau = static_cast<real>(a.tau);
    SG_CHECK(ec.registration == "filterreg" || ec.registration == "icp",
             "eval: --registration must be filterreg or icp");

    const std::vector<SceneSample> corpus = load_corpus(a.gt);
    std::map<uint64_t, const SceneSample*> by_id;
    for (const auto& s : corpus) by_id[s.scene_id] = &s;

    std::vector<std::string> scene_dirs;
    for (const auto& e : fs::directory_iterator(a.pred))
        if (e.is_directory() && e.path().filename().string().rfind("scene_", 0) == 0)
            scene_dirs.push_back(e.path().string());
    std::sort(scene_dirs.begin(), scene_dirs.end());
    SG_CHECK(!scene_dirs.empty(), "eval: no scene_* directories under " + a.pred);

    std::vector<MetricReport> reports(scene_dirs.size());
    parallel_for(static_cast<int>(scene_dirs.size()), worker_count(), [&](int i) {
        const SampledScene pred = load_sampled_scene(scene_dirs[static_cast<size_t>(i)]);
        const auto it = by_id.find(pred.scene_id);
        if (it == by_id.end())
            throw FormatError("eval: scene id " + std::to_string(pred.scene_id) +
                              " not present in ground-truth corpus");
        reports[static_cast<size_t>(i)] = evaluate_scene(eval_view(pred), eval_view(*it->second), ec);
    });

    real total_runtime = 0;
    for (auto& r : reports) {
        total_runtime += r.runtime_sec;
        r.runtime_sec = 0;  // keep written reports byte-identical across reruns
    }

    const std::string out = a.out.empty() ? a.pred : a.out;
    fs::create_directories(out);
    write_text(out + "/report.json", summary_json(reports).dump(2) + "\n");
    write_text(out + "/report.csv", summary_csv(reports));
    if (a.markdown)
        write_text(out + "/report.md", summary_markdown({{"ours", aggregate(reports)}}));

    nlohmann::json cfg = {{"eval", ec.to_json()}, {"pred", a.pred}, {"markdown", a.markdown}};
    std::vector<std::string> outputs = {out + "/report.json", out + "/report.csv"};
    if (a.markdown) outputs.push_back(out + "/report.md");
    write_manifest(out, "eval", cfg, {a.gt}, outputs);

    const AggregateMetrics m = aggregate(reports);
    std::cout << "scenes " << reports.size() << "  cd_s " << m.cd_s << "  fscore_s "
              << m.fscore_s << "  cd_o " << m.cd_o << "  fscore_o " << m.fscore_o << "  iou_b "
              << m.iou_b << "  collision " << m.collision_iou << "  (eval wall "
              << total_runtime << "s)\n";
    return 0;
}

// ------------------------------------------------------------ ablate

struct AblateArgs {
    std::string config, ckpt, corpus, out, flags = "drop_geo,drop_global_v,drop_mask,ss_to_as";
    std::string registration;
    uint64_t seed = 0;
    int views = 1, steps = -1, scenes = -1;
    double cfg_weight = -1, tau = -1;
};

AblationFlags flags_from_name(const std::string& name) {
    AblationFlags f;
    if (name == "drop_geo")
        f.drop_geo = true;
    else if (name == "drop_global_v")
        f.drop_global_v = true;
    else if (name == "drop_mask")
        f.drop_mask = true;
    else if (name == "ss_to_as")
        f.ss_to_as = true;
    else
        throw FormatError("ablate: unknown flag '" + name +
                          "' (expected drop_geo, drop_global_v, drop_mask or ss_to_as)");
    return f;
}

int cmd_ablate(const AblateArgs& a) {
    const nlohmann::json file_cfg = load_config(a.config);
    SampleArgs sample_defaults;
    sample_defaults.steps = a.steps;
    sample_defaults.cfg_weight = a.cfg_weight;
    const SampleConfig base = resolve_sample_config(sample_defaults, file_cfg);
    EvalConfig ec = eval_from_json(section(file_cfg, "eval"));
    if (!a.registration.empty()) ec.registration = a.registration;
    if (a.tau > 0) ec.tau = static_cast<real>(a.tau);

    const SceneGenModel model = load_model_from(a.ckpt);
    std::vector<SceneSample> corpus = load_corpus(a.corpus);
    SG_CHECK(!corpus.empty(), "ablate: empty corpus");
    SG_CHECK(corpus[0].views.empty() || corpus[0].views[0].size == model.cfg.enc.view_size,
             "ablate: corpus view size does not match checkpoint view_size");
    if (a.scenes > 0 && static_cast<size_t>(a.scenes) < corpus.size())
        corpus.resize(static_cast<size_t>(a.scenes));

    std::vector<std::string> variant_names = {"full"};
    {
        std::stringstream ss(a.flags);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) variant_names.push_back(tok);
    }

    std::vector<int> view_ids(static_cast<size_t>(a.views));
    for (int k = 0; k < a.views; ++k) view_ids[static_cast<size_t>(k)] = k;

    fs::create_directories(a.out);
    std::vector<std::pair<std::string, AggregateMetrics>> rows;
    nlohmann::json variants = nlohmann::json::object();
    for (const std::string& name : variant_names) {
        SceneGenModel variant = model;  // weights shared; behaviour flag differs
        apply_ablation(variant, name == "full" ? AblationFlags{} : flags_from_name(name));
        std::vector<MetricReport> reports;
        for (const SceneSample& scene : corpus) {
            SampleConfig sc = base;
            // Same per-scene noise across variants isolates the architecture switch.
            sc.seed = splitmix64(a.seed ^ splitmix64(scene.scene_id));
            const SampledScene s = sample_scene_multiview(variant, scene, view_ids, sc);
            MetricReport r = evaluate_scene(eval_view(s), eval_view(scene), ec);
            r.runtime_sec = 0;
            reports.push_back(std::move(r));
        }
        rows.emplace_back(name, aggregate(reports));
        variants[name] = summary_json(reports);
    }

    write_text(a.out + "/table.md", summary_markdown(rows));
    write_text(a.out + "/table.json", variants.dump(2) + "\n");
    {
        std::ostringstream csv;
        csv << "variant,cd_s,fscore_s,cd_o,fscore_o,iou_b,collision_iou\n";
        csv.precision(10);
        for (const auto& [name, m] : rows)
            csv << name << "," << m.cd_s << "," << m.fscore_s << "," << m.cd_o << ","
                << m.fscore_o << "," << m.iou_b << "," << m.collision_iou << "\n";
        write_text(a.out + "/table.csv", csv.str());
    }

    nlohmann::json cfg = {{"seed", a.seed},       {"views", a.views},
                          {"flags", a.flags},     {"scenes", a.scenes},
                          {"sample", base.to_json()}, {"eval", ec.to_json()}};
    write_manifest(a.out, "ablate", cfg, {a.corpus},
                   {a.out + "/table.md", a.out + "/table.json", a.out + "/table.csv"});
    std::cout << summary_markdown(rows);
    return 0;
}

// ------------------------------------------------------------ inspect

struct InspectArgs {
    std::string ckpt;
};

int cmd_inspect(const InspectArgs& a) {
    const bool is_dir = fs::is_directory(a.ckpt);
    const std::string wpath = is_dir ? a.ckpt + "/weights.sgck" : a.ckpt;
    const Checkpoint ck = load_checkpoint(wpath);
    if (!ck.meta.contains("model"))
        throw FormatError("inspect: " + wpath + " has no model config");
    const ModelConfig mc = ModelConfig::from_json(ck.meta["model"]);
    SceneGenModel model = SceneGenModel::create(mc, 0);
    model.load_weights(ck);  // verifies presence and shape of every tensor

    std::string trainable_mode = "global_only";  // fresh-model default regime
    nlohmann::json train_cfg;
    if (is_dir && fs::exists(a.ckpt + "/state.json")) {
        std::ifstream is(a.ckpt + "/state.json");
        const nlohmann::json st = nlohmann::json::parse(is);
        train_cfg = st.value("train_config", nlohmann::json());
        trainable_mode = train_cfg.value("trainable", trainable_mode);
    }
    select_trainable(model.params, trainable_mode);

    std::map<std::string, int64_t> modules;
    for (const auto& [name, t] : model.params.items())
        modules[name.substr(0, name.find('.'))] += t.numel();
    int64_t trainable = 0;
    for (const std::string& name : model.params.trainable_names())
        trainable += model.params.get(name).numel();

    nlohmann::json out;
    out["model"] = mc.to_json();
    if (!train_cfg.is_null()) out["train_config"] = train_cfg;
    out["total_params"] = model.params.total_scalars();
    out["modules"] = modules;
    out["trainable_mode"] = trainable_mode;
    out["trainable_params"] = trainable;
    out["frozen_params"] = model.params.total_scalars() - trainable;
    out["trainable_tensors"] = model.params.trainable_names();
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int worker_count() {
    const char* env = std::getenv("SCENEGEN_WORKERS");
    if (!env) return 1;
    return std::max(1, std::atoi(env));
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"compositional multi-asset 3d scene generation toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen-data", "generate a synthetic scene corpus");
    g->add_option("--config", gen.config, "JSON config file");
    g->add_option("--seed", gen.seed, "corpus seed");
    g->add_option("--out", gen.out, "output directory")->required();
    g->add_option("--scenes", gen.scenes, "number of base scenes");
    g->add_option("--min-assets", gen.min_assets, "minimum assets per scene");
    g->add_option("--max-assets", gen.max_assets, "maximum assets per scene");
    g->add_option("--views", gen.views, "rendered views per scene");
    g->add_flag("--augment", gen.augment, "expand each scene over all query choices");

    TrainDecoderArgs td;
    auto* d = app.add_subcommand("train-decoder", "pretrain the structure decoder");
    d->add_option("--config", td.config, "JSON config file");
    d->add_option("--seed", td.seed, "init/shuffle seed");
    d->add_option("--corpus", td.corpus, "corpus file")->required();
    d->add_option("--out", td.out, "output directory")->required();
    d->add_option("--epochs", td.epochs, "pretraining epochs");
    d->add_option("--lr", td.lr, "learning rate");
    d->add_option("--noise-std", td.noise_std, "latent noise level");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train the scene flow model");
    t->add_option("--config", tr.config, "JSON config file");
    auto* seed_opt = t->add_option("--seed", tr.seed, "training seed (overrides config)");
    t->add_option("--corpus", tr.corpus, "corpus file")->required();
    t->add_option("--out", tr.out, "run directory")->required();
    t->add_option("--resume", tr.resume, "checkpoint directory to resume from");
    t->add_option("--decoder-init", tr.decoder_init, "pretrained decoder checkpoint");
    t->add_option("--epochs", tr.epochs, "epochs to reach (overrides config)");

    SampleArgs sa;
    auto* s = app.add_subcommand("sample", "generate scenes from a checkpoint");
    s->add_option("--config", sa.config, "JSON config file");
    s->add_option("--ckpt", sa.ckpt, "checkpoint directory or weights file")->required();
    s->add_option("--corpus", sa.corpus, "corpus with conditioning scenes")->required();
    s->add_option("--out", sa.out, "output directory")->required();
    s->add_option("--seed", sa.seed, "sampling seed");
    s->add_option("--views", sa.views, "number of conditioning views");
    s->add_option("--steps", sa.steps, "Euler steps");
    s->add_option("--cfg-weight", sa.cfg_weight, "guidance weight");
    s->add_option("--latent-fusion", sa.fusion, "velocity_mean or reference_view");
    s->add_option("--scene", sa.scene, "corpus index to sample (default: all)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "score generated scenes against ground truth");
    e->add_option("--config", ev.config, "JSON config file");
    e->add_option("--pred", ev.pred, "directory with sampled scene_* folders")->required();
    e->add_option("--gt", ev.gt, "ground-truth corpus file")->required();
    e->add_option("--out", ev.out, "report directory (default: --pred)");
    e->add_option("--registration", ev.registration, "filterreg or icp");
    e->add_option("--tau", ev.tau, "F-score threshold");
    e->add_flag("--markdown", ev.markdown, "also render a markdown summary table");

    AblateArgs ab;
    auto* b = app.add_subcommand("ablate", "run architecture-variant comparison");
    b->add_option("--config", ab.config, "JSON config file");
    b->add_option("--ckpt", ab.ckpt, "checkpoint directory or weights file")->required();
    b->add_option("--corpus", ab.corpus, "corpus file")->required();
    b->add_option("--out", ab.out, "output directory")->required();
    b->add_option("--flags", ab.flags, "comma list of ablation switches");
    b->add_option("--seed", ab.seed, "sampling seed");
    b->add_option("--views", ab.views, "conditioning views");
    b->add_option("--steps", ab.steps, "Euler steps");
    b->add_option("--cfg-weight", ab.cfg_weight, "guidance weight");
    b->add_option("--scenes", ab.scenes, "cap on evaluated scenes");
    b->add_option("--registration", ab.registration, "filterreg or icp");
    b->add_option("--tau", ab.tau, "F-score threshold");

    InspectArgs in;
    auto* i = app.add_subcommand("inspect", "summarize a checkpoint");
    i->add_option("--ckpt", in.ckpt, "checkpoint directory or weights file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    try {
        if (g->parsed()) return cmd_gen_data(gen);
        if (d->parsed()) return cmd_train_decoder(td);
        if (t->parsed()) {
            tr.seed_set = seed_opt->count() > 0;
            return cmd_train(tr);
        }
        if (s->parsed()) return cmd_sample(sa);
        if (e->parsed()) return cmd_eval(ev);
        if (b->parsed()) return cmd_ablate(ab);
        if (i->parsed()) return cmd_inspect(in);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.emplace_back("scenegen");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace scenegen
