#pragma once

#include "mediogrid/units.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mediogrid
{
    class CatalogError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct PhysicalLocation
    {
        NodeId node;
        std::string path;

        auto operator<=>(const PhysicalLocation &) const = default;
    };

    std::string to_string(const PhysicalLocation &loc);

    struct CatalogRecord
    {
        std::string lfn;
        std::string collection;
        Bytes size = 0;
        std::set<PhysicalLocation> replicas;

        bool operator==(const CatalogRecord &) const = default;
    };

    struct LookupResult
    {
        std::string collection;
        Bytes size = 0;
        std::vector<PhysicalLocation> replicas; // ordered by (node, path)
    };

    /// Replica location service. Logical file names map to a collection, a size
    /// and a set of physical copies. Not internally synchronized: the owning
    /// event loop is the single writer.
    class Catalog
    {
    public:
        const CatalogRecord &register_file(const std::string &lfn, const std::string &collection, Bytes size);

        /// Removes the record together with all of its replicas.
        void unregister_file(std::string_view lfn);

        const CatalogRecord &add_replica(std::string_view lfn, const PhysicalLocation &location);
        const CatalogRecord &remove_replica(std::string_view lfn, const PhysicalLocation &location);

        LookupResult lookup(std::string_view lfn) const;
        const CatalogRecord *find(std::string_view lfn) const;
        bool contains(std::string_view lfn) const { return find(lfn) != nullptr; }

        std::vector<std::string> list_collection(std::string_view collection) const;
        std::vector<std::string> collections() const;

        std::size_t size() const noexcept { return records_.size(); }
        const std::map<std::string, CatalogRecord, std::less<>> &records() const noexcept { return records_; }

        /// Tab-separated text, one record per line, sorted by lfn.
        std::string snapshot() const;
        static Catalog restore(std::string_view text);

        bool operator==(const Catalog &other) const { return records_ == other.records_; }

    private:
        CatalogRecord &record(std::string_view lfn);

        std::map<std::string, CatalogRecord, std::less<>> records_;
        std::map<std::string, std::set<std::string>, std::less<>> collections_;
    };
} // namespace mediogrid
