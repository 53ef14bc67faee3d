#pragma once

#include <charconv>
#include <istream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace pushgp::cli {

/// CLI11 config formatter reading and writing flat JSON objects keyed by long
/// option name. Keys are applied to the subcommand selected on the command
/// line. A sidecar written by this tool ({"command", "config", ...}) is
/// accepted as well; only its "config" member is read.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* root = nullptr) : root_(root) {}

    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        return options_json(app, default_also).dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& is) const override {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
        }
        if (j.is_object() && j.contains("command") && j.contains("config")) j = j["config"];
        if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");
        std::vector<std::string> parents;
        if (root_ != nullptr && !root_->get_subcommands().empty()) parents = {root_->get_subcommands().front()->get_name()};
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                if (value.empty()) continue;  // an empty list is the default
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

    /// Current values (or defaults) of every named option of `app`.
    static nlohmann::json options_json(const CLI::App* app, bool default_also = true) {
        nlohmann::json out = nlohmann::json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty()) continue;
            const std::string& name = opt->get_lnames().front();
            if (name == "help" || name == "config") continue;
            const bool flag = opt->get_expected_max() == 0;
            std::vector<std::string> vals = opt->results();
            if (vals.empty()) {
                if (!default_also) continue;
                const std::string def = strip_brackets(opt->get_default_str());
                if (flag) vals = {def.empty() ? "false" : def};
                else if (def != "{}" && !def.empty()) vals = CLI::detail::split_up(def, ',');
                else if (opt->get_expected_max() == 1) continue;
            }
            if (opt->get_expected_max() > 1) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& v : vals) arr.push_back(typed(v));
                out[name] = std::move(arr);
            } else if (flag) {
                out[name] = vals.back() != "false" && vals.back() != "0";
            } else {
                out[name] = typed(vals.back());
            }
        }
        return out;
    }

private:
    const CLI::App* root_;

    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number() || v.is_null()) return v.dump();
        throw CLI::ConversionError("nested JSON values are not valid option values");
    }

    static std::string strip_brackets(std::string s) {
        if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
        return s;
    }

    static nlohmann::json typed(const std::string& s) {
        double d = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec == std::errc() && p == s.data() + s.size()) {
            long long i = 0;
            const auto [pi, eci] = std::from_chars(s.data(), s.data() + s.size(), i);
            if (eci == std::errc() && pi == s.data() + s.size()) return i;
            return d;
        }
        if (s == "true") return true;
        if (s == "false") return false;
        return s;
    }
};

}  // namespace pushgp::cli
