#include "mediogrid/config_text.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

namespace mediogrid
{
    namespace
    {
        constexpr std::array kKnownSections = {
            std::string_view{"cluster"}, std::string_view{"link"},   std::string_view{"defaults"},
            std::string_view{"replication"}, std::string_view{"ingest"}, std::string_view{"sched"},
            std::string_view{"monitor"},
        };

        std::vector<std::string> split_ws(std::string_view s)
        {
            std::vector<std::string> out;
            std::size_t i = 0;
            while (i < s.size())
            {
                while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
                    ++i;
                std::size_t j = i;
                while (j < s.size() && s[j] != ' ' && s[j] != '\t')
                    ++j;
                if (j > i)
                    out.emplace_back(s.substr(i, j - i));
                i = j;
            }
            return out;
        }

        std::string_view strip(std::string_view s)
        {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
                s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.remove_suffix(1);
            return s;
        }
    } // namespace

    ConfigError::ConfigError(int line, const std::string &message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line)
    {
    }

    double parse_double(std::string_view text, int line, std::string_view what)
    {
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
            throw ConfigError(line, "invalid number for " + std::string(what) + ": '" + std::string(text) + "'");
        return value;
    }

    long long parse_integer(std::string_view text, int line, std::string_view what)
    {
        long long value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size())
            throw ConfigError(line, "invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
        return value;
    }

    std::vector<ConfigSection> parse_config_sections(std::string_view text)
    {
        std::vector<ConfigSection> sections;
        std::istringstream in{std::string(text)};
        std::string raw;
        int number = 0;
        while (std::getline(in, raw))
        {
            ++number;
            std::string_view line = raw;
            if (auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = strip(line);
            if (line.empty())
                continue;

            if (line.front() == '[')
            {
                if (line.back() != ']')
                    throw ConfigError(number, "unterminated section header");
                auto words = split_ws(line.substr(1, line.size() - 2));
                if (words.empty())
                    throw ConfigError(number, "empty section header");
                if (std::find(kKnownSections.begin(), kKnownSections.end(), words.front()) == kKnownSections.end())
                    throw ConfigError(number, "unknown section '" + words.front() + "'");
                ConfigSection section;
                section.number = number;
                section.kind = words.front();
                section.args.assign(words.begin() + 1, words.end());
                sections.push_back(std::move(section));
                continue;
            }

            if (sections.empty())
                throw ConfigError(number, "content before first section");

            ConfigLine cl;
            cl.number = number;
            auto words = split_ws(line);
            std::size_t first = 0;
            if (words.front().find('=') == std::string::npos)
            {
                cl.directive = words.front();
                first = 1;
            }
            for (std::size_t i = first; i < words.size(); ++i)
            {
                auto eq = words[i].find('=');
                if (eq == std::string::npos)
                {
                    cl.args.push_back(words[i]);
                    continue;
                }
                if (eq == 0)
                    throw ConfigError(number, "missing key before '='");
                cl.pairs.emplace_back(words[i].substr(0, eq), words[i].substr(eq + 1));
            }
            if (cl.directive.empty() && !cl.args.empty())
                throw ConfigError(number, "stray token '" + cl.args.front() + "'");
            sections.back().lines.push_back(std::move(cl));
        }
        return sections;
    }

    KeyReader::KeyReader(const ConfigSection &section)
    {
        for (const auto &line : section.lines)
        {
            if (!line.directive.empty())
                continue;
            for (const auto &[key, value] : line.pairs)
            {
                if (!entries_.emplace(key, Entry{value, line.number, false}).second)
                    throw ConfigError(line.number, "duplicate key '" + key + "'");
            }
        }
    }

    KeyReader::Entry *KeyReader::find(const std::string &key)
    {
        auto it = entries_.find(key);
        if (it == entries_.end())
            return nullptr;
        it->second.used = true;
        return &it->second;
    }

    std::optional<double> KeyReader::number(const std::string &key)
    {
        if (auto *e = find(key))
            return parse_double(e->value, e->line, key);
        return std::nullopt;
    }

    std::optional<long long> KeyReader::integer(const std::string &key)
    {
        if (auto *e = find(key))
            return parse_integer(e->value, e->line, key);
        return std::nullopt;
    }

    std::optional<std::string> KeyReader::text(const std::string &key)
    {
        if (auto *e = find(key))
        {
            if (e->value.empty())
                throw ConfigError(e->line, "empty value for " + key);
            return e->value;
        }
        return std::nullopt;
    }

    std::optional<bool> KeyReader::flag(const std::string &key)
    {
        if (auto *e = find(key))
        {
            if (e->value == "on" || e->value == "true" || e->value == "1")
                return true;
            if (e->value == "off" || e->value == "false" || e->value == "0")
                return false;
            throw ConfigError(e->line, "expected on/off for " + key);
        }
        return std::nullopt;
    }

    void KeyReader::reject_unknown() const
    {
        for (const auto &[key, e] : entries_)
        {
            if (!e.used)
                throw ConfigError(e.line, "unknown key '" + key + "'");
        }
    }
} // namespace mediogrid
