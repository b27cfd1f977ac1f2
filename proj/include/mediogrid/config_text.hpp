#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mediogrid
{
    /// Parse failure in any config section, carrying the offending line number.
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(int line, const std::string &message);

        int line() const noexcept { return line_; }

    private:
        int line_;
    };

    // One body line of a section. `directive` is the leading bare word (e.g.
    // "node", "target") or empty when the line only holds key=value pairs.
    struct ConfigLine
    {
        int number = 0;
        std::string directive;
        std::vector<std::string> args;
        std::vector<std::pair<std::string, std::string>> pairs;
    };

    struct ConfigSection
    {
        int number = 0;
        std::string kind;
        std::vector<std::string> args;
        std::vector<ConfigLine> lines;
    };

    /// Split config text into `[kind args...]` sections. Comments start at `#`.
    /// Section kinds outside the known set are rejected.
    std::vector<ConfigSection> parse_config_sections(std::string_view text);

    /// Typed reads of a section's key=value pairs. Keys never read are reported
    /// by reject_unknown().
    class KeyReader
    {
    public:
        explicit KeyReader(const ConfigSection &section);

        std::optional<double> number(const std::string &key);
        std::optional<long long> integer(const std::string &key);
        std::optional<std::string> text(const std::string &key);
        std::optional<bool> flag(const std::string &key);

        /// Throws for any key=value pair nobody asked for.
        void reject_unknown() const;

    private:
        struct Entry
        {
            std::string value;
            int line = 0;
            bool used = false;
        };

        Entry *find(const std::string &key);

        std::map<std::string, Entry> entries_;
    };

    double parse_double(std::string_view text, int line, std::string_view what);
    long long parse_integer(std::string_view text, int line, std::string_view what);
} // namespace mediogrid
