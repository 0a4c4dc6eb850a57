#include "pullback/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "pullback/csv.hpp"
#include "pullback/errors.hpp"

namespace pullback {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        const std::string_view item = trim(std::string_view(s).substr(start, comma == std::string::npos ? s.npos : comma - start));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) {
        throw InvalidArgument("config key '" + key + "': '" + v + "' is not a finite number");
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size()) {
        throw InvalidArgument("config key '" + key + "': '" + v + "' is not a non-negative integer");
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

ConfigMap parse_config_text(std::string_view text, const std::string& source) {
    ConfigMap map;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ": line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(where + ": unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) throw ParseError(where + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(where + ": expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(where + ": missing key before '='");
        const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        if (map.count(full)) throw ParseError(where + ": duplicate key '" + full + "'");
        map[full] = std::string(trim(line.substr(eq + 1)));
    }
    return map;
}

ConfigMap read_config_file(const std::filesystem::path& path) { return parse_config_text(read_file(path), path.string()); }

void Grid::validate(const char* name) const {
    const std::string n(name);
    if (count == 0) throw InvalidArgument(n + ": count must be at least 1");
    if (!std::isfinite(min) || !std::isfinite(max)) throw InvalidArgument(n + ": bounds must be finite");
    // A single point only uses min; max may equal it.
    if (count > 1 ? !(min < max) : !(min <= max)) throw InvalidArgument(n + ": min must be below max");
    if (log_spaced && !(min > 0.0)) throw InvalidArgument(n + ": log spacing needs a positive min");
}

std::vector<double> Grid::values() const {
    std::vector<double> out;
    if (count == 1) return {min};
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        if (i == 0) {
            out.push_back(min);
        } else if (i == count - 1) {
            out.push_back(max);
        } else if (log_spaced) {
            out.push_back(std::exp(std::log(min) + t * (std::log(max) - std::log(min))));
        } else {
            out.push_back(min + t * (max - min));
        }
    }
    return out;
}

Likelihood ExperimentConfig::resolved_likelihood() const {
    if (likelihood == "auto") return data.is_idx() ? Likelihood::bernoulli : Likelihood::gaussian;
    return parse_likelihood(likelihood);
}

Architecture ExperimentConfig::architecture() const {
    Architecture a = Architecture::from_profile(profile);
    a.normalization = normalization;
    a.decoder_sigma = decoder_sigma;
    return a;
}

void ExperimentConfig::validate() const {
    if (!data.is_idx()) {
        parse_manifold_kind(data.kind);
        if (data.n == 0) throw InvalidArgument("data.n must be at least 1");
        if (data.test_n == 0) throw InvalidArgument("data.test_n must be at least 1");
        if (data.ambient_dim == 0) throw InvalidArgument("data.ambient_dim must be at least 1");
        if (!(data.noise_std >= 0.0)) throw InvalidArgument("data.noise_std must be non-negative");
        if (!(data.radius > 0.0)) throw InvalidArgument("data.radius must be positive");
    } else if (data.train_images.empty()) {
        throw InvalidArgument("data.train_images is required for idx data");
    }
    architecture();
    const Likelihood lik = resolved_likelihood();
    if (decoder_sigma && lik == Likelihood::bernoulli) {
        throw InvalidArgument("model.decoder_sigma requires the gaussian likelihood");
    }
    train.validate();
    beta_grid.validate("sweep.beta");
    delta_grid.validate("sweep.delta");
    if (eigen_directions == 0) throw InvalidArgument("sweep.eigen_directions must be at least 1");
    if (seeds.empty()) throw InvalidArgument("at least one seed is required");
    if (attack_deltas.empty()) throw InvalidArgument("attack.deltas must not be empty");
    for (double d : attack_deltas)
        if (!(d >= 0.0)) throw InvalidArgument("attack.deltas must be non-negative");
    if (attack_directions.empty()) throw InvalidArgument("attack.directions must not be empty");
    for (std::size_t k : attack_directions)
        if (k == 0) throw InvalidArgument("attack.directions are 1-based");
    if (jobs == 0) throw InvalidArgument("run.jobs must be at least 1");
}

void ExperimentConfig::apply_paper_scale() {
    beta_grid = Grid{50, 0.01, 10.0, true};
    delta_grid = Grid{40, 0.01, 10.0, true};
}

ExperimentConfig config_from_map(const ConfigMap& map, ExperimentConfig base) {
    ExperimentConfig& c = base;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"data.kind", [&](auto&, auto& v) { c.data.kind = v; }},
        {"data.n", [&](auto& k, auto& v) { c.data.n = to_size(k, v); }},
        {"data.test_n", [&](auto& k, auto& v) { c.data.test_n = to_size(k, v); }},
        {"data.ambient_dim", [&](auto& k, auto& v) { c.data.ambient_dim = to_size(k, v); }},
        {"data.noise_std", [&](auto& k, auto& v) { c.data.noise_std = to_double(k, v); }},
        {"data.radius", [&](auto& k, auto& v) { c.data.radius = to_double(k, v); }},
        {"data.seed", [&](auto& k, auto& v) { c.data.seed = to_u64(k, v); }},
        {"data.train_images", [&](auto&, auto& v) { c.data.train_images = v; }},
        {"data.train_labels", [&](auto&, auto& v) { c.data.train_labels = v; }},
        {"data.test_images", [&](auto&, auto& v) { c.data.test_images = v; }},
        {"data.test_labels", [&](auto&, auto& v) { c.data.test_labels = v; }},
        {"data.limit", [&](auto& k, auto& v) { c.data.limit = to_size(k, v); }},
        {"data.test_limit", [&](auto& k, auto& v) { c.data.test_limit = to_size(k, v); }},
        {"model.profile", [&](auto&, auto& v) { c.profile = v; }},
        {"model.likelihood", [&](auto&, auto& v) { c.likelihood = v; }},
        {"model.normalization", [&](auto& k, auto& v) { c.normalization = to_bool(k, v); }},
        {"model.decoder_sigma", [&](auto& k, auto& v) { c.decoder_sigma = to_bool(k, v); }},
        {"train.learning_rate", [&](auto& k, auto& v) { c.train.learning_rate = to_double(k, v); }},
        {"train.epochs", [&](auto& k, auto& v) { c.train.epochs = to_size(k, v); }},
        {"train.batch_size", [&](auto& k, auto& v) { c.train.batch_size = to_size(k, v); }},
        {"train.beta", [&](auto& k, auto& v) { c.train.beta = to_double(k, v); }},
        {"train.mixup_weight", [&](auto& k, auto& v) { c.train.mixup_weight = to_double(k, v); }},
        {"train.mixup_shape", [&](auto& k, auto& v) { c.train.mixup_shape = to_double(k, v); }},
        {"sweep.beta_count", [&](auto& k, auto& v) { c.beta_grid.count = to_size(k, v); }},
        {"sweep.beta_min", [&](auto& k, auto& v) { c.beta_grid.min = to_double(k, v); }},
        {"sweep.beta_max", [&](auto& k, auto& v) { c.beta_grid.max = to_double(k, v); }},
        {"sweep.beta_log", [&](auto& k, auto& v) { c.beta_grid.log_spaced = to_bool(k, v); }},
        {"sweep.delta_count", [&](auto& k, auto& v) { c.delta_grid.count = to_size(k, v); }},
        {"sweep.delta_min", [&](auto& k, auto& v) { c.delta_grid.min = to_double(k, v); }},
        {"sweep.delta_max", [&](auto& k, auto& v) { c.delta_grid.max = to_double(k, v); }},
        {"sweep.delta_log", [&](auto& k, auto& v) { c.delta_grid.log_spaced = to_bool(k, v); }},
        {"sweep.eigen_directions", [&](auto& k, auto& v) { c.eigen_directions = to_size(k, v); }},
        {"sweep.attack_mode", [&](auto&, auto& v) { c.attack_mode = parse_attack_mode(v); }},
        {"sweep.metric_source", [&](auto&, auto& v) { c.metric_source = parse_metric_source(v); }},
        {"sweep.eval_samples", [&](auto& k, auto& v) { c.eval_samples = to_size(k, v); }},
        {"run.seeds",
         [&](auto& k, auto& v) {
             c.seeds.clear();
             for (const auto& s : split_list(v)) c.seeds.push_back(to_u64(k, s));
         }},
        {"run.output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
        {"run.jobs", [&](auto& k, auto& v) { c.jobs = to_size(k, v); }},
        {"attack.deltas",
         [&](auto& k, auto& v) {
             c.attack_deltas.clear();
             for (const auto& s : split_list(v)) c.attack_deltas.push_back(to_double(k, s));
         }},
        {"attack.directions",
         [&](auto& k, auto& v) {
             c.attack_directions.clear();
             for (const auto& s : split_list(v)) c.attack_directions.push_back(to_size(k, s));
         }},
        {"attack.image_grid", [&](auto& k, auto& v) { c.image_grid = to_bool(k, v); }},
    };
    for (const auto& [key, value] : map) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ParseError("unknown config key '" + key + "'");
        it->second(key, value);
    }
    return base;
}

}  // namespace pullback
