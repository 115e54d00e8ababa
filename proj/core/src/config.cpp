#include "plab/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "plab/error.hpp"

namespace plab {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& origin, const std::string& what) {
    throw Error("config: " + origin + ": " + what);
}

json read_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) config_error(path.string(), "malformed JSON");
    return j;
}

json parse_json_text(const std::string& text, const std::string& origin) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) config_error(origin, "malformed JSON");
    return j;
}

/// Applies `a.b.c=value` onto the document, creating missing sections along
/// the way; typos are caught afterwards by the schema's unknown-key check.
void apply_override(json& doc, const std::string& kv, const std::string& origin) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        config_error(origin, "override '" + kv + "' is not of the form key.path=value");
    const std::string path = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);

    json* cur = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (!cur->is_object())
            config_error(origin, "override '" + path + "' descends into a non-object");
        if (!cur->contains(key)) (*cur)[key] = json::object();
        cur = &(*cur)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }

    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value; // bare strings allowed unquoted
    if (cur->is_string() && !parsed.is_string()) parsed = value;
    *cur = parsed;
}

// -- field readers with error context ---------------------------------------

struct Ctx {
    const json& j;
    std::string origin;
    std::string scope;

    const json* find(const std::string& key) const {
        if (!j.is_object()) config_error(origin, scope + " must be an object");
        auto it = j.find(key);
        return it == j.end() ? nullptr : &*it;
    }

    Ctx child(const std::string& key) const {
        const json* v = find(key);
        if (!v) config_error(origin, "missing section '" + scope + key + "'");
        return Ctx{*v, origin, scope + key + "."};
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    template <typename T>
    T get(const std::string& key, T fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        try {
            return v->get<T>();
        } catch (const json::exception&) {
            config_error(origin, "field '" + scope + key + "' has the wrong type");
        }
    }

    void check_known(std::initializer_list<const char*> known) const {
        if (!j.is_object()) return;
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* k : known)
                if (it.key() == k) { ok = true; break; }
            if (!ok) config_error(origin, "unknown config key '" + scope + it.key() + "'");
        }
    }
};

Placement parse_placement(const std::string& s, const std::string& origin) {
    if (s == "random_offset") return Placement::RandomOffset;
    if (s == "fixed_offset") return Placement::FixedOffset;
    config_error(origin, "placement must be random_offset or fixed_offset, got '" + s + "'");
}

Objective parse_objective(const std::string& s, const std::string& origin) {
    if (s == "MMCL") return Objective::MMCL;
    if (s == "MMCL_SSL") return Objective::MMCL_SSL;
    config_error(origin, "objective must be MMCL or MMCL_SSL, got '" + s + "'");
}

LossMode parse_loss_mode(const std::string& s, const std::string& origin) {
    if (s == "MMCL_only") return LossMode::MMCL_only;
    if (s == "SSL_only") return LossMode::SSL_only;
    if (s == "MMCL_SSL") return LossMode::MMCL_SSL;
    config_error(origin, "loss_mode must be MMCL_only, SSL_only or MMCL_SSL, got '" + s + "'");
}

PseudoLabelSource parse_source(const std::string& s, const std::string& origin) {
    if (s == "kmeans") return PseudoLabelSource::KMeans;
    if (s == "oracle") return PseudoLabelSource::Oracle;
    config_error(origin, "deep_clust.source must be kmeans or oracle, got '" + s + "'");
}

AugmentSpec parse_aug(const Ctx& c) {
    c.check_known({"jitter_sigma", "dropout_prob"});
    AugmentSpec aug;
    aug.jitter_sigma = c.get("jitter_sigma", aug.jitter_sigma);
    aug.dropout_prob = c.get("dropout_prob", aug.dropout_prob);
    return aug;
}

RunConfig run_config_from_json(const json& doc, const std::string& origin) {
    Ctx root{doc, origin, ""};
    root.check_known({"output_dir", "world", "trigger", "data", "eval", "encoder", "pretrain",
                      "select", "clean", "shrink_perturb", "clean_checkpoint"});
    RunConfig cfg;
    cfg.output_dir = root.get<std::string>("output_dir", cfg.output_dir);
    cfg.clean_checkpoint = root.get<std::string>("clean_checkpoint", cfg.clean_checkpoint);

    if (root.has("world")) {
        Ctx c = root.child("world");
        c.check_known({"num_classes", "d_img", "d_txt", "prototype_scale", "noise_sigma", "seed"});
        cfg.world.num_classes = c.get("num_classes", cfg.world.num_classes);
        cfg.world.d_img = c.get("d_img", cfg.world.d_img);
        cfg.world.d_txt = c.get("d_txt", cfg.world.d_txt);
        cfg.world.prototype_scale = c.get("prototype_scale", cfg.world.prototype_scale);
        cfg.world.noise_sigma = c.get("noise_sigma", cfg.world.noise_sigma);
        cfg.world.seed = c.get("seed", cfg.world.seed);
    }
    if (root.has("trigger")) {
        Ctx c = root.child("trigger");
        c.check_known({"patch_len", "placement", "fixed_offset", "target_class", "seed"});
        cfg.trigger.patch_len = c.get("patch_len", cfg.trigger.patch_len);
        if (c.has("placement"))
            cfg.trigger.placement = parse_placement(c.get<std::string>("placement", ""), origin);
        cfg.trigger.fixed_offset = c.get("fixed_offset", cfg.trigger.fixed_offset);
        cfg.trigger.target_class = c.get("target_class", cfg.trigger.target_class);
        cfg.trigger.seed = c.get("seed", cfg.trigger.seed);
    }
    if (root.has("data")) {
        Ctx c = root.child("data");
        c.check_known({"pretrain_rows", "poison_count", "templates_per_class", "clean_rows",
                       "residual_poison", "clean_seed"});
        cfg.data.pretrain_rows = c.get("pretrain_rows", cfg.data.pretrain_rows);
        cfg.data.poison_count = c.get("poison_count", cfg.data.poison_count);
        cfg.data.templates_per_class = c.get("templates_per_class", cfg.data.templates_per_class);
        cfg.data.clean_rows = c.get("clean_rows", cfg.data.clean_rows);
        cfg.data.residual_poison = c.get("residual_poison", cfg.data.residual_poison);
        cfg.data.clean_seed = c.get("clean_seed", cfg.data.clean_seed);
    }
    if (root.has("eval")) {
        Ctx c = root.child("eval");
        c.check_known({"rows", "seed", "asr_seed"});
        cfg.eval.rows = c.get("rows", cfg.eval.rows);
        cfg.eval.seed = c.get("seed", cfg.eval.seed);
        cfg.eval.asr_seed = c.get("asr_seed", cfg.eval.asr_seed);
    }
    if (root.has("encoder")) {
        Ctx c = root.child("encoder");
        c.check_known({"image_dims", "text_dims", "seed"});
        cfg.encoder.image_dims = c.get("image_dims", cfg.encoder.image_dims);
        cfg.encoder.text_dims = c.get("text_dims", cfg.encoder.text_dims);
        cfg.encoder.seed = c.get("seed", cfg.encoder.seed);
    }
    if (root.has("pretrain")) {
        Ctx c = root.child("pretrain");
        c.check_known({"objective", "epochs", "batch_size", "peak_lr", "warmup_steps", "ssl_weight",
                       "weight_decay", "aug", "seed", "eval_every"});
        if (c.has("objective"))
            cfg.pretrain.objective = parse_objective(c.get<std::string>("objective", ""), origin);
        cfg.pretrain.epochs = c.get("epochs", cfg.pretrain.epochs);
        cfg.pretrain.batch_size = c.get("batch_size", cfg.pretrain.batch_size);
        cfg.pretrain.peak_lr = c.get("peak_lr", cfg.pretrain.peak_lr);
        cfg.pretrain.warmup_steps = c.get("warmup_steps", cfg.pretrain.warmup_steps);
        cfg.pretrain.ssl_weight = c.get("ssl_weight", cfg.pretrain.ssl_weight);
        cfg.pretrain.weight_decay = c.get("weight_decay", cfg.pretrain.weight_decay);
        if (c.has("aug")) cfg.pretrain.aug = parse_aug(c.child("aug"));
        cfg.pretrain.seed = c.get("seed", cfg.pretrain.seed);
        cfg.pretrain.eval_every = c.get("eval_every", cfg.pretrain.eval_every);
    }
    if (root.has("select")) {
        Ctx c = root.child("select");
        c.check_known({"rule", "target"});
        const std::string rule = c.get<std::string>("rule", "max_accuracy");
        if (rule == "max_accuracy")
            cfg.select.kind = SelectRule::MaxAccuracy;
        else if (rule == "closest_accuracy")
            cfg.select.kind = SelectRule::ClosestAccuracy;
        else
            config_error(origin, "select.rule must be max_accuracy or closest_accuracy");
        cfg.select.target = c.get("target", cfg.select.target);
    }
    if (root.has("clean")) {
        Ctx c = root.child("clean");
        c.check_known({"loss_mode", "epochs", "batch_size", "lr", "warmup_steps", "ssl_weight",
                       "weight_decay", "aug", "deep_clust", "l2_weight", "seed"});
        if (c.has("loss_mode"))
            cfg.clean.loss_mode = parse_loss_mode(c.get<std::string>("loss_mode", ""), origin);
        cfg.clean.epochs = c.get("epochs", cfg.clean.epochs);
        cfg.clean.batch_size = c.get("batch_size", cfg.clean.batch_size);
        cfg.clean.lr = c.get("lr", cfg.clean.lr);
        cfg.clean.warmup_steps = c.get("warmup_steps", cfg.clean.warmup_steps);
        cfg.clean.ssl_weight = c.get("ssl_weight", cfg.clean.ssl_weight);
        cfg.clean.weight_decay = c.get("weight_decay", cfg.clean.weight_decay);
        if (c.has("aug")) cfg.clean.aug = parse_aug(c.child("aug"));
        if (c.has("deep_clust")) {
            Ctx d = c.child("deep_clust");
            d.check_known({"enabled", "k", "relabel_every", "source", "weight"});
            cfg.clean.deep_clust.enabled = d.get("enabled", cfg.clean.deep_clust.enabled);
            cfg.clean.deep_clust.k = d.get("k", cfg.clean.deep_clust.k);
            cfg.clean.deep_clust.relabel_every =
                d.get("relabel_every", cfg.clean.deep_clust.relabel_every);
            if (d.has("source"))
                cfg.clean.deep_clust.source = parse_source(d.get<std::string>("source", ""), origin);
            cfg.clean.deep_clust.weight = d.get("weight", cfg.clean.deep_clust.weight);
        }
        cfg.clean.l2_weight = c.get("l2_weight", cfg.clean.l2_weight);
        cfg.clean.seed = c.get("seed", cfg.clean.seed);
    }
    if (root.has("shrink_perturb")) {
        Ctx c = root.child("shrink_perturb");
        c.check_known({"enabled", "lambda", "sigma", "include_log_tau", "seed"});
        cfg.shrink_perturb.enabled = c.get("enabled", cfg.shrink_perturb.enabled);
        cfg.shrink_perturb.lambda = c.get("lambda", cfg.shrink_perturb.lambda);
        cfg.shrink_perturb.sigma = c.get("sigma", cfg.shrink_perturb.sigma);
        cfg.shrink_perturb.include_log_tau =
            c.get("include_log_tau", cfg.shrink_perturb.include_log_tau);
        cfg.shrink_perturb.seed = c.get("seed", cfg.shrink_perturb.seed);
    }
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["output_dir"] = cfg.output_dir;
    j["clean_checkpoint"] = cfg.clean_checkpoint;
    j["world"] = {{"num_classes", cfg.world.num_classes},
                  {"d_img", cfg.world.d_img},
                  {"d_txt", cfg.world.d_txt},
                  {"prototype_scale", cfg.world.prototype_scale},
                  {"noise_sigma", cfg.world.noise_sigma},
                  {"seed", cfg.world.seed}};
    j["trigger"] = {
        {"patch_len", cfg.trigger.patch_len},
        {"placement",
         cfg.trigger.placement == Placement::RandomOffset ? "random_offset" : "fixed_offset"},
        {"fixed_offset", cfg.trigger.fixed_offset},
        {"target_class", cfg.trigger.target_class},
        {"seed", cfg.trigger.seed}};
    j["data"] = {{"pretrain_rows", cfg.data.pretrain_rows},
                 {"poison_count", cfg.data.poison_count},
                 {"templates_per_class", cfg.data.templates_per_class},
                 {"clean_rows", cfg.data.clean_rows},
                 {"residual_poison", cfg.data.residual_poison},
                 {"clean_seed", cfg.data.clean_seed}};
    j["eval"] = {{"rows", cfg.eval.rows}, {"seed", cfg.eval.seed}, {"asr_seed", cfg.eval.asr_seed}};
    j["encoder"] = {{"image_dims", cfg.encoder.image_dims},
                    {"text_dims", cfg.encoder.text_dims},
                    {"seed", cfg.encoder.seed}};
    j["pretrain"] = {{"objective", objective_name(cfg.pretrain.objective)},
                     {"epochs", cfg.pretrain.epochs},
                     {"batch_size", cfg.pretrain.batch_size},
                     {"peak_lr", cfg.pretrain.peak_lr},
                     {"warmup_steps", cfg.pretrain.warmup_steps},
                     {"ssl_weight", cfg.pretrain.ssl_weight},
                     {"weight_decay", cfg.pretrain.weight_decay},
                     {"aug",
                      {{"jitter_sigma", cfg.pretrain.aug.jitter_sigma},
                       {"dropout_prob", cfg.pretrain.aug.dropout_prob}}},
                     {"seed", cfg.pretrain.seed},
                     {"eval_every", cfg.pretrain.eval_every}};
    j["select"] = {
        {"rule", cfg.select.kind == SelectRule::MaxAccuracy ? "max_accuracy" : "closest_accuracy"},
        {"target", cfg.select.target}};
    j["clean"] = {{"loss_mode", loss_mode_name(cfg.clean.loss_mode) == "MMCL"
                                    ? "MMCL_only"
                                    : (loss_mode_name(cfg.clean.loss_mode) == "SSL" ? "SSL_only"
                                                                                    : "MMCL_SSL")},
                  {"epochs", cfg.clean.epochs},
                  {"batch_size", cfg.clean.batch_size},
                  {"lr", cfg.clean.lr},
                  {"warmup_steps", cfg.clean.warmup_steps},
                  {"ssl_weight", cfg.clean.ssl_weight},
                  {"weight_decay", cfg.clean.weight_decay},
                  {"aug",
                   {{"jitter_sigma", cfg.clean.aug.jitter_sigma},
                    {"dropout_prob", cfg.clean.aug.dropout_prob}}},
                  {"deep_clust",
                   {{"enabled", cfg.clean.deep_clust.enabled},
                    {"k", cfg.clean.deep_clust.k},
                    {"relabel_every", cfg.clean.deep_clust.relabel_every},
                    {"source",
                     cfg.clean.deep_clust.source == PseudoLabelSource::KMeans ? "kmeans" : "oracle"},
                    {"weight", cfg.clean.deep_clust.weight}}},
                  {"l2_weight", cfg.clean.l2_weight},
                  {"seed", cfg.clean.seed}};
    j["shrink_perturb"] = {{"enabled", cfg.shrink_perturb.enabled},
                           {"lambda", cfg.shrink_perturb.lambda},
                           {"sigma", cfg.shrink_perturb.sigma},
                           {"include_log_tau", cfg.shrink_perturb.include_log_tau},
                           {"seed", cfg.shrink_perturb.seed}};
    return j;
}

SweepConfig sweep_config_from_json(const json& doc, const std::string& origin) {
    Ctx root{doc, origin, ""};
    root.check_known({"base", "master_seed", "parallelism", "axes"});
    SweepConfig sweep;
    if (!root.has("base")) config_error(origin, "missing section 'base'");
    sweep.base = run_config_from_json(doc.at("base"), origin);
    sweep.master_seed = root.get("master_seed", sweep.master_seed);
    sweep.parallelism = root.get("parallelism", sweep.parallelism);
    if (root.has("axes")) {
        Ctx c = root.child("axes");
        c.check_known({"lr", "ssl_weight", "l2_weight", "lambda", "sigma", "residual_poison",
                       "clean_rows", "epochs"});
        sweep.lr = c.get("lr", sweep.lr);
        sweep.ssl_weight = c.get("ssl_weight", sweep.ssl_weight);
        sweep.l2_weight = c.get("l2_weight", sweep.l2_weight);
        sweep.lambda = c.get("lambda", sweep.lambda);
        sweep.sigma = c.get("sigma", sweep.sigma);
        sweep.residual_poison = c.get("residual_poison", sweep.residual_poison);
        sweep.clean_rows = c.get("clean_rows", sweep.clean_rows);
        sweep.epochs = c.get("epochs", sweep.epochs);
    }
    if (sweep.parallelism < 1) config_error(origin, "parallelism must be >= 1");
    return sweep;
}

std::uint64_t fnv1a64_str(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace

std::size_t SweepConfig::cell_count() const {
    auto dim = [](std::size_t n) { return n == 0 ? std::size_t{1} : n; };
    return dim(lr.size()) * dim(ssl_weight.size()) * dim(l2_weight.size()) * dim(lambda.size()) *
           dim(sigma.size()) * dim(residual_poison.size()) * dim(clean_rows.size()) *
           dim(epochs.size());
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
    json doc = read_json(path);
    for (const std::string& kv : overrides) apply_override(doc, kv, path.string());
    return run_config_from_json(doc, path.string());
}

SweepConfig load_sweep_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
    json doc = read_json(path);
    for (const std::string& kv : overrides) apply_override(doc, kv, path.string());
    return sweep_config_from_json(doc, path.string());
}

RunConfig parse_run_config(const std::string& json_text, const std::string& origin,
                           const std::vector<std::string>& overrides) {
    json doc = parse_json_text(json_text, origin);
    for (const std::string& kv : overrides) apply_override(doc, kv, origin);
    return run_config_from_json(doc, origin);
}

SweepConfig parse_sweep_config(const std::string& json_text, const std::string& origin,
                               const std::vector<std::string>& overrides) {
    json doc = parse_json_text(json_text, origin);
    for (const std::string& kv : overrides) apply_override(doc, kv, origin);
    return sweep_config_from_json(doc, origin);
}

std::string run_config_json(const RunConfig& cfg) {
    return run_config_to_json(cfg).dump(2);
}

std::string sweep_config_json(const SweepConfig& cfg) {
    json j;
    j["base"] = run_config_to_json(cfg.base);
    j["master_seed"] = cfg.master_seed;
    j["parallelism"] = cfg.parallelism;
    j["axes"] = {{"lr", cfg.lr},
                 {"ssl_weight", cfg.ssl_weight},
                 {"l2_weight", cfg.l2_weight},
                 {"lambda", cfg.lambda},
                 {"sigma", cfg.sigma},
                 {"residual_poison", cfg.residual_poison},
                 {"clean_rows", cfg.clean_rows},
                 {"epochs", cfg.epochs}};
    return j.dump(2);
}

std::string config_fingerprint(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_str(run_config_json(cfg))));
    return std::string(buf);
}

} // namespace plab
