#pragma once

// File-backed JSON document store: root/<collection>/<id>.json, each write
// going through a temp file, fsync and rename.

#include "planspace/error.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace planspace {

class Store {
public:
    static inline const std::vector<std::string> COLLECTIONS = {"projects", "demos", "sessions", "jobs",
                                                                "catalogs"};

    /// Called between writing the temp file and renaming it into place;
    /// tests throw from here to simulate a crash mid-write.
    std::function<void(const std::filesystem::path& temp)> before_rename;

    /// Opens (creating if needed) the store and checks every document
    /// parses. Leftover temp files from interrupted writes are removed.
    explicit Store(std::filesystem::path root) : root_(std::move(root))
    {
        namespace fs = std::filesystem;
        std::error_code ec;
        for (const std::string& c : COLLECTIONS) {
            fs::create_directories(root_ / c, ec);
            if (ec)
                throw Error(ErrorCode::Validation, "cannot create store directory " + (root_ / c).string(),
                            {{"path", (root_ / c).string()}});
        }
        for (const std::string& c : COLLECTIONS)
            for (const auto& entry : fs::directory_iterator(root_ / c)) {
                const std::string name = entry.path().filename().string();
                if (name.rfind(".tmp-", 0) == 0) {
                    fs::remove(entry.path(), ec);
                    continue;
                }
                if (entry.path().extension() != ".json")
                    continue;
                if (!nlohmann::json::accept(read_file(entry.path())))
                    throw Error(ErrorCode::StoreCorrupt, "corrupt document " + entry.path().string(),
                                {{"path", entry.path().string()}});
            }
    }

    const std::filesystem::path& root() const { return root_; }

    void put(const std::string& collection, const std::string& id, const nlohmann::json& doc)
    {
        const auto target = path_of(collection, id);
        std::lock_guard lock(mutex_);
        const auto temp = target.parent_path() / (".tmp-" + id + "-" + std::to_string(++temp_counter_));
        const std::string text = doc.dump(2) + "\n";
        int fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd < 0)
            throw Error(ErrorCode::Validation, "cannot write " + temp.string(), {{"path", temp.string()}});
        std::size_t written = 0;
        while (written < text.size()) {
            const ssize_t n = ::write(fd, text.data() + written, text.size() - written);
            if (n <= 0) {
                ::close(fd);
                throw Error(ErrorCode::Validation, "short write to " + temp.string(), {{"path", temp.string()}});
            }
            written += static_cast<std::size_t>(n);
        }
        ::fsync(fd);
        ::close(fd);
        if (before_rename)
            before_rename(temp);
        std::filesystem::rename(temp, target);
        int dir = ::open(target.parent_path().c_str(), O_RDONLY);
        if (dir >= 0) {
            ::fsync(dir);
            ::close(dir);
        }
    }

    std::optional<nlohmann::json> get(const std::string& collection, const std::string& id) const
    {
        const auto p = path_of(collection, id);
        std::lock_guard lock(mutex_);
        if (!std::filesystem::exists(p))
            return std::nullopt;
        try {
            return nlohmann::json::parse(read_file(p));
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::StoreCorrupt, "corrupt document " + p.string(), {{"path", p.string()}});
        }
    }

    nlohmann::json require(const std::string& collection, const std::string& id) const
    {
        if (auto doc = get(collection, id))
            return *doc;
        throw Error(ErrorCode::NotFound, collection + "/" + id + " not found",
                    {{"collection", collection}, {"id", id}});
    }

    bool exists(const std::string& collection, const std::string& id) const
    {
        return std::filesystem::exists(path_of(collection, id));
    }

    std::vector<std::string> list(const std::string& collection) const
    {
        check_collection(collection);
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        for (const auto& entry : std::filesystem::directory_iterator(root_ / collection))
            if (entry.path().extension() == ".json" && entry.path().filename().string()[0] != '.')
                out.push_back(entry.path().stem().string());
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Next free id of the form <prefix>-<n>.
    std::string new_id(const std::string& collection, const std::string& prefix)
    {
        std::lock_guard lock(mutex_);
        for (std::size_t n = 1;; ++n) {
            std::string id = prefix + "-" + std::to_string(n);
            if (!std::filesystem::exists(root_ / collection / (id + ".json")) && !reserved_.count(id)) {
                reserved_.insert(id);
                return id;
            }
        }
    }

    static void check_id(const std::string& id)
    {
        if (id.empty() || id.size() > 128 || id[0] == '.' ||
            !std::all_of(id.begin(), id.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
            }))
            throw Error(ErrorCode::Validation, "invalid document id '" + id + "'", {{"id", id}});
    }

private:
    static void check_collection(const std::string& c)
    {
        if (std::find(COLLECTIONS.begin(), COLLECTIONS.end(), c) == COLLECTIONS.end())
            throw Error(ErrorCode::Validation, "unknown collection '" + c + "'");
    }

    std::filesystem::path path_of(const std::string& collection, const std::string& id) const
    {
        check_collection(collection);
        check_id(id);
        return root_ / collection / (id + ".json");
    }

    static std::string read_file(const std::filesystem::path& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::filesystem::path root_;
    mutable std::recursive_mutex mutex_;
    std::size_t temp_counter_ = 0;
    std::set<std::string> reserved_;
};

} // namespace planspace
