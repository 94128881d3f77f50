#include "stfuse/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace stfuse::cfg {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
}

const json& require(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key)) bad_key(ctx + key, "missing");
    return j.at(key);
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& ctx) {
    try {
        return require(j, key, ctx).get<T>();
    } catch (const json::exception&) {
        bad_key(ctx + key, "wrong type");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& ctx, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        bad_key(ctx + key, "wrong type");
    }
}

Eigen::VectorXd get_vector(const json& j, const std::string& key, const std::string& ctx) {
    const auto v = get_as<std::vector<double>>(j, key, ctx);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string value,
                              const char* env_override) {
    if (const char* env = std::getenv(env_override); env && *env) value = env;
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

}  // namespace

const ModalityConfig& RunConfig::high_res_modality() const {
    for (const auto& m : modalities)
        if (m.high_res) return m;
    throw ConfigError("config key 'modalities': no modality flagged high_res");
}

void RunConfig::validate() const {
    if (modalities.empty()) bad_key("modalities", "at least one modality required");
    int high = 0;
    for (const auto& m : modalities) {
        const std::string ctx = "modalities[" + m.name + "].";
        if (m.name.empty()) bad_key("modalities[].name", "must not be empty");
        if (m.bands <= 0) bad_key(ctx + "bands", "must be positive");
        if (m.scale < 1) bad_key(ctx + "scale", "must be >= 1");
        if (m.noise_var.size() != m.bands)
            bad_key(ctx + "noise_var", "needs one entry per band");
        if ((m.noise_var.array() <= 0.0).any())
            bad_key(ctx + "noise_var", "entries must be > 0");
        if (m.gains.size() != 0) {
            if (m.gains.size() != m.bands)
                bad_key(ctx + "gains", "needs one entry per band (or \"auto\")");
            if ((m.gains.array() <= 0.0).any())
                bad_key(ctx + "gains", "entries must be > 0");
        }
        if (m.accepted_codes.empty())
            bad_key(ctx + "accepted_codes", "must not be empty");
        high += m.high_res ? 1 : 0;
    }
    if (high != 1)
        bad_key("modalities", "exactly one modality must be flagged high_res");
    if (high_res_modality().scale != 1)
        bad_key("modalities[" + high_res_modality().name + "].scale",
                "the high_res modality must have scale 1");
    if (!(p0_scale > 0.0)) bad_key("init.p0_scale", "must be > 0");
    if (q_mode == QMode::Constant && !(xi > 0.0))
        bad_key("dynamics.xi", "must be > 0 in constant mode");
    if (q_mode == QMode::DataDriven) {
        if (q_window < 1) bad_key("dynamics.d", "must be >= 1");
        if (!(q_floor > 0.0)) bad_key("dynamics.eps2", "must be > 0");
        if (archive_manifest.empty())
            bad_key("paths.archive", "required in data_driven mode");
    }
    if (patch_size < 0) bad_key("patch_size", "must be >= 0");
    if (steps < 0) bad_key("steps", "must be >= 0");
    if (init_image.empty()) bad_key("init.image", "missing");
    if (observations_manifest.empty()) bad_key("paths.observations", "missing");
    if (output_dir.empty()) bad_key("paths.output", "missing");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const json j = parse_file(path);
    const std::filesystem::path base = path.parent_path();
    RunConfig c;

    const auto mode = get_as<std::string>(j, "mode", "");
    if (mode == "filter")
        c.mode = RunMode::Filter;
    else if (mode == "smooth")
        c.mode = RunMode::Smooth;
    else
        bad_key("mode", "must be 'filter' or 'smooth'");

    c.patch_size = get_or<int>(j, "patch_size", "", 0);
    c.jobs = get_or<int>(j, "jobs", "", 0);
    c.steps = get_or<int>(j, "steps", "", 0);

    const json& init = require(j, "init", "");
    c.init_image = resolve(base, get_as<std::string>(init, "image", "init."),
                           "STFUSE_INIT_IMAGE");
    c.p0_scale = get_or<double>(init, "p0_scale", "init.", 1e-10);

    const json& dyn = require(j, "dynamics", "");
    const auto qmode = get_as<std::string>(dyn, "mode", "dynamics.");
    if (qmode == "constant") {
        c.q_mode = QMode::Constant;
        c.xi = get_as<double>(dyn, "xi", "dynamics.");
    } else if (qmode == "data_driven") {
        c.q_mode = QMode::DataDriven;
        c.q_window = get_or<int>(dyn, "d", "dynamics.", 1);
        c.q_floor = get_or<double>(dyn, "eps2", "dynamics.", 1e-5);
    } else {
        bad_key("dynamics.mode", "must be 'constant' or 'data_driven'");
    }

    const json& paths = require(j, "paths", "");
    c.observations_manifest = resolve(
        base, get_as<std::string>(paths, "observations", "paths."), "STFUSE_OBSERVATIONS");
    if (paths.contains("archive") || std::getenv("STFUSE_ARCHIVE"))
        c.archive_manifest =
            resolve(base, get_or<std::string>(paths, "archive", "paths.", ""), "STFUSE_ARCHIVE");
    c.output_dir =
        resolve(base, get_or<std::string>(paths, "output", "paths.", ""), "STFUSE_OUTPUT");

    for (const json& jm : require(j, "modalities", "")) {
        ModalityConfig m;
        m.name = get_as<std::string>(jm, "name", "modalities[].");
        const std::string ctx = "modalities[" + m.name + "].";
        m.bands = get_as<int>(jm, "bands", ctx);
        m.scale = get_or<int>(jm, "scale", ctx, 1);
        m.noise_var = get_vector(jm, "noise_var", ctx);
        if (jm.contains("gains") && jm.at("gains").is_string()) {
            if (jm.at("gains").get<std::string>() != "auto")
                bad_key(ctx + "gains", "string value must be \"auto\"");
            // empty gains = calibrate from the initialization pair
        } else if (jm.contains("gains")) {
            m.gains = get_vector(jm, "gains", ctx);
        } else {
            m.gains = Eigen::VectorXd::Ones(m.bands);
        }
        m.accepted_codes = get_or<std::vector<int>>(jm, "accepted_codes", ctx, {0});
        m.high_res = get_or<bool>(jm, "high_res", ctx, false);
        c.modalities.push_back(std::move(m));
    }

    c.validate();
    return c;
}

sim::SceneConfig load_scene_config(const std::filesystem::path& path) {
    const json j = parse_file(path);
    sim::SceneConfig c;

    const auto dims = get_as<std::vector<int>>(j, "dims", "");
    if (dims.size() != 2) bad_key("dims", "must be [rows, cols]");
    c.rows = dims[0];
    c.cols = dims[1];
    c.bands = get_as<int>(j, "bands", "");
    c.steps = get_as<int>(j, "steps", "");
    c.seed = get_as<std::uint64_t>(j, "seed", "");

    const json& region = require(j, "region", "");
    c.water_mean = get_vector(region, "water_mean", "region.");
    c.land_mean = get_vector(region, "land_mean", "region.");
    c.sigma_scene = get_as<double>(region, "sigma_scene", "region.");
    c.initial_radius = get_as<double>(region, "initial_radius", "region.");
    c.shoreline_rate = get_as<double>(region, "shoreline_rate", "region.");

    c.outlier_rate = get_or<double>(j, "outlier_rate", "", 0.0);

    for (const json& jm : require(j, "cadence", "")) {
        sim::ModalitySchedule m;
        m.name = get_as<std::string>(jm, "name", "cadence[].");
        const std::string ctx = "cadence[" + m.name + "].";
        m.scale = get_or<int>(jm, "scale", ctx, 1);
        {
            const auto v = get_as<std::vector<double>>(jm, "noise_sigma", ctx);
            m.noise_sigma =
                Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
        if (jm.contains("gains")) {
            const auto v = get_as<std::vector<double>>(jm, "gains", ctx);
            m.gains =
                Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
        if (jm.contains("steps") && jm.at("steps").is_string()) {
            if (jm.at("steps").get<std::string>() != "all")
                bad_key(ctx + "steps", "string value must be \"all\"");
        } else if (jm.contains("steps")) {
            m.steps = get_as<std::vector<int>>(jm, "steps", ctx);
        }
        m.high_res = get_or<bool>(jm, "high_res", ctx, false);
        c.cadence.push_back(std::move(m));
    }

    c.validate();
    return c;
}

}  // namespace stfuse::cfg
