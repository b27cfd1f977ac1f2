#include "mediogrid/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace mediogrid
{
    namespace
    {
        bool has_whitespace(std::string_view s)
        {
            return std::any_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
        }

        void check_name(std::string_view value, std::string_view what)
        {
            if (value.empty())
                throw CatalogError(std::string(what) + " must not be empty");
            if (has_whitespace(value))
                throw CatalogError(std::string(what) + " '" + std::string(value) + "' contains whitespace");
        }

        void check_location(const PhysicalLocation &loc)
        {
            check_name(loc.node, "node");
            check_name(loc.path, "path");
            if (loc.node.find_first_of(":,") != std::string::npos)
                throw CatalogError("node '" + loc.node + "' contains a reserved character");
            if (loc.path.find(',') != std::string::npos)
                throw CatalogError("path '" + loc.path + "' contains a comma");
        }

        std::vector<std::string_view> split(std::string_view s, char sep)
        {
            std::vector<std::string_view> out;
            std::size_t start = 0;
            while (true)
            {
                auto pos = s.find(sep, start);
                out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
                if (pos == std::string_view::npos)
                    break;
                start = pos + 1;
            }
            return out;
        }
    } // namespace

    std::string to_string(const PhysicalLocation &loc) { return loc.node + ":" + loc.path; }

    CatalogRecord &Catalog::record(std::string_view lfn)
    {
        auto it = records_.find(lfn);
        if (it == records_.end())
            throw CatalogError("unknown lfn '" + std::string(lfn) + "'");
        return it->second;
    }

    const CatalogRecord *Catalog::find(std::string_view lfn) const
    {
        auto it = records_.find(lfn);
        return it == records_.end() ? nullptr : &it->second;
    }

    const CatalogRecord &Catalog::register_file(const std::string &lfn, const std::string &collection, Bytes size)
    {
        check_name(lfn, "lfn");
        check_name(collection, "collection");
        if (size == 0)
            throw CatalogError("lfn '" + lfn + "' registered with zero size");
        auto [it, inserted] = records_.try_emplace(lfn, CatalogRecord{lfn, collection, size, {}});
        if (!inserted)
            throw CatalogError("duplicate lfn '" + lfn + "'");
        collections_[collection].insert(lfn);
        return it->second;
    }

    void Catalog::unregister_file(std::string_view lfn)
    {
        auto it = records_.find(lfn);
        if (it == records_.end())
            throw CatalogError("unknown lfn '" + std::string(lfn) + "'");
        auto cit = collections_.find(it->second.collection);
        cit->second.erase(it->second.lfn);
        if (cit->second.empty())
            collections_.erase(cit);
        records_.erase(it);
    }

    const CatalogRecord &Catalog::add_replica(std::string_view lfn, const PhysicalLocation &location)
    {
        auto &rec = record(lfn);
        check_location(location);
        if (!rec.replicas.insert(location).second)
            throw CatalogError("duplicate replica " + to_string(location) + " for '" + rec.lfn + "'");
        return rec;
    }

    const CatalogRecord &Catalog::remove_replica(std::string_view lfn, const PhysicalLocation &location)
    {
        auto &rec = record(lfn);
        if (rec.replicas.erase(location) == 0)
            throw CatalogError("unknown replica " + to_string(location) + " for '" + rec.lfn + "'");
        return rec;
    }

    LookupResult Catalog::lookup(std::string_view lfn) const
    {
        const auto *rec = find(lfn);
        if (!rec)
            throw CatalogError("unknown lfn '" + std::string(lfn) + "'");
        return LookupResult{rec->collection, rec->size, {rec->replicas.begin(), rec->replicas.end()}};
    }

    std::vector<std::string> Catalog::list_collection(std::string_view collection) const
    {
        auto it = collections_.find(collection);
        if (it == collections_.end())
            return {};
        return {it->second.begin(), it->second.end()};
    }

    std::vector<std::string> Catalog::collections() const
    {
        std::vector<std::string> out;
        out.reserve(collections_.size());
        for (const auto &[name, members] : collections_)
            out.push_back(name);
        return out;
    }

    std::string Catalog::snapshot() const
    {
        std::string out;
        for (const auto &[lfn, rec] : records_)
        {
            out += lfn;
            out += '\t';
            out += rec.collection;
            out += '\t';
            out += std::to_string(rec.size);
            out += '\t';
            if (rec.replicas.empty())
            {
                out += '-';
            }
            else
            {
                bool first = true;
                for (const auto &loc : rec.replicas)
                {
                    if (!first)
                        out += ',';
                    first = false;
                    out += to_string(loc);
                }
            }
            out += '\n';
        }
        return out;
    }

    Catalog Catalog::restore(std::string_view text)
    {
        Catalog catalog;
        int number = 0;
        std::string_view rest = text;
        while (!rest.empty())
        {
            ++number;
            auto nl = rest.find('\n');
            if (nl == std::string_view::npos)
                throw CatalogError("line " + std::to_string(number) + ": truncated record (missing newline)");
            std::string_view line = rest.substr(0, nl);
            rest.remove_prefix(nl + 1);

            auto fail = [number](const std::string &why) {
                return CatalogError("line " + std::to_string(number) + ": " + why);
            };
            auto fields = split(line, '\t');
            if (fields.size() != 4)
                throw fail("expected 4 tab-separated fields, got " + std::to_string(fields.size()));

            Bytes size = 0;
            auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), size);
            if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size())
                throw fail("invalid size '" + std::string(fields[2]) + "'");

            try
            {
                std::string lfn(fields[0]);
                if (!catalog.records_.empty() && catalog.records_.rbegin()->first > lfn)
                    throw CatalogError("records not sorted by lfn");
                catalog.register_file(lfn, std::string(fields[1]), size);
                if (fields[3] != "-")
                {
                    for (auto entry : split(fields[3], ','))
                    {
                        auto colon = entry.find(':');
                        if (colon == std::string_view::npos)
                            throw CatalogError("replica '" + std::string(entry) + "' is not node:path");
                        catalog.add_replica(lfn, PhysicalLocation{std::string(entry.substr(0, colon)),
                                                                  std::string(entry.substr(colon + 1))});
                    }
                }
            }
            catch (const CatalogError &e)
            {
                throw fail(e.what());
            }
        }
        return catalog;
    }
} // namespace mediogrid
