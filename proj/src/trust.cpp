#include "udfvault/trust.hpp"

#include <fcntl.h>
#include <pwd.h>
#include <sodium.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "udfvault/error.hpp"

namespace udfvault::trust {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void init_sodium()
{
    static const int rc = sodium_init();
    if (rc < 0)
        fail(Errc::MalformedKey, "libsodium failed to initialize");
}

std::string slurp(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        fail(Errc::StorageError, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Write-then-rename so readers never observe a partial file.
void write_atomic(const fs::path& file, std::string_view contents, fs::perms mode = fs::perms::owner_read |
                                                                                   fs::perms::owner_write |
                                                                                   fs::perms::group_read |
                                                                                   fs::perms::others_read)
{
    const fs::path tmp = file.string() + ".tmp" + std::to_string(::getpid());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, static_cast<mode_t>(mode));
    if (fd < 0)
        fail(Errc::StorageError, "cannot create " + tmp.string());
    std::size_t done = 0;
    while (done < contents.size()) {
        auto n = ::write(fd, contents.data() + done, contents.size() - done);
        if (n <= 0) {
            ::close(fd);
            fail(Errc::StorageError, "cannot write " + tmp.string());
        }
        done += static_cast<std::size_t>(n);
    }
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec)
        fail(Errc::StorageError, "cannot move " + tmp.string() + " into place: " + ec.message());
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(Errc::StorageError, "cannot create " + dir.string() + ": " + ec.message());
}

bool valid_profile_name(std::string_view name)
{
    if (name.empty() || name == "." || name == "..")
        return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

Rules deny_all()
{
    return Rules{};
}

Rules trusted_defaults()
{
    Rules r;
    r.capabilities.hosted_allowed = true;
    return r;
}

std::string std_trim(std::string s)
{
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
    return s;
}

} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    init_sodium();
    std::string out(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(out.size() - 1); // encoded length counts the terminator
    return out;
}

Bytes base64_decode(std::string_view text)
{
    init_sodium();
    Bytes out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size())
        fail(Errc::MalformedKey, "invalid base64");
    out.resize(len);
    return out;
}

PublicKey public_key_from_base64(std::string_view text)
{
    const Bytes raw = base64_decode(text);
    if (raw.size() != crypto_sign_PUBLICKEYBYTES)
        fail(Errc::MalformedKey, "public key must be 32 bytes, got " + std::to_string(raw.size()));
    PublicKey key;
    std::copy(raw.begin(), raw.end(), key.begin());
    return key;
}

std::string key_id(const PublicKey& key)
{
    init_sodium();
    std::uint8_t digest[8];
    crypto_generichash(digest, sizeof digest, key.data(), key.size(), nullptr, 0);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (auto b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 15]);
    }
    return out;
}

std::string KeyRecord::to_json() const
{
    json j{{"algorithm", algorithm}, {"public_key", base64_encode(public_key)}, {"name", owner_name}, {"email", owner_email}};
    return j.dump(2) + "\n";
}

KeyRecord KeyRecord::from_json(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(Errc::MalformedKey, std::string("key file is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("public_key") || !j["public_key"].is_string())
        fail(Errc::MalformedKey, "key file lacks a public_key string");
    KeyRecord r;
    r.algorithm = j.value("algorithm", std::string(kAlgorithm));
    if (r.algorithm != kAlgorithm)
        fail(Errc::MalformedKey, "unsupported key algorithm '" + r.algorithm + "'");
    r.public_key = public_key_from_base64(j["public_key"].get<std::string>());
    r.owner_name = j.value("name", "");
    r.owner_email = j.value("email", "");
    return r;
}

Owner default_owner()
{
    Owner o;
    if (const char* n = std::getenv("UDFVAULT_NAME"))
        o.name = n;
    if (const char* e = std::getenv("UDFVAULT_EMAIL"))
        o.email = e;
    std::string login;
    if (const passwd* pw = ::getpwuid(::getuid())) {
        login = pw->pw_name ? pw->pw_name : "";
        if (o.name.empty() && pw->pw_gecos && *pw->pw_gecos) {
            std::string gecos = pw->pw_gecos;
            o.name = gecos.substr(0, gecos.find(','));
        }
    }
    if (login.empty())
        if (const char* u = std::getenv("USER"))
            login = u;
    if (o.name.empty())
        o.name = login;
    if (o.email.empty() && !login.empty()) {
        char host[256] = {};
        ::gethostname(host, sizeof host - 1);
        o.email = login + "@" + (host[0] ? host : "localhost");
    }
    return o;
}

SigningKey SigningKey::from_seed(const Seed& seed)
{
    init_sodium();
    SigningKey k;
    k.seed_ = seed;
    crypto_sign_seed_keypair(k.public_.data(), k.secret_.data(), seed.data());
    return k;
}

SigningKey SigningKey::generate()
{
    init_sodium();
    Seed seed;
    randombytes_buf(seed.data(), seed.size());
    return from_seed(seed);
}

Signature SigningKey::sign(std::span<const std::uint8_t> message) const
{
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
    return sig;
}

bool verify(const PublicKey& key, std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature)
{
    init_sodium();
    if (signature.size() != crypto_sign_BYTES)
        return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), key.data()) == 0;
}

Identity ensure_keypair(const fs::path& root, const Owner& owner)
{
    const fs::path dir = root / "identity";
    const fs::path secret_file = dir / "secret.key";
    const fs::path public_file = dir / "public.json";
    ensure_dir(dir);

    if (fs::exists(secret_file)) {
        Bytes seed_bytes;
        try {
            seed_bytes = base64_decode(std_trim(slurp(secret_file)));
        } catch (const Error&) {
            fail(Errc::StorageError, "corrupt private key file " + secret_file.string());
        }
        if (seed_bytes.size() != crypto_sign_SEEDBYTES)
            fail(Errc::StorageError, "corrupt private key file " + secret_file.string());
        Seed seed;
        std::copy(seed_bytes.begin(), seed_bytes.end(), seed.begin());
        Identity id{{}, SigningKey::from_seed(seed)};
        if (fs::exists(public_file)) {
            try {
                id.record = KeyRecord::from_json(slurp(public_file));
            } catch (const Error&) {
                fail(Errc::StorageError, "corrupt public key file " + public_file.string());
            }
            if (id.record.public_key != id.key.public_key())
                fail(Errc::StorageError, public_file.string() + " does not match " + secret_file.string());
        } else {
            id.record.public_key = id.key.public_key();
            id.record.owner_name = owner.name;
            id.record.owner_email = owner.email;
            write_atomic(public_file, id.record.to_json());
        }
        return id;
    }
    if (fs::exists(public_file))
        fail(Errc::StorageError, public_file.string() + " exists without its private key " + secret_file.string());

    Identity id{{}, SigningKey::generate()};
    id.record.public_key = id.key.public_key();
    id.record.owner_name = owner.name;
    id.record.owner_email = owner.email;
    write_atomic(secret_file, base64_encode(id.key.seed()) + "\n", fs::perms::owner_read | fs::perms::owner_write);
    write_atomic(public_file, id.record.to_json());
    return id;
}

std::string Rules::to_json() const
{
    json j{
        {"capabilities",
         {{"fs_read", capabilities.fs_read},
          {"fs_write", capabilities.fs_write},
          {"network", false},
          {"hosted_allowed", capabilities.hosted_allowed}}},
        {"limits",
         {{"op_budget", limits.op_budget},
          {"memory_cap", limits.memory_cap},
          {"wall_timeout_ms", limits.wall_timeout.count()}}},
    };
    return j.dump(2) + "\n";
}

Rules Rules::from_json(std::string_view text)
{
    Rules r;
    try {
        const json j = json::parse(text);
        if (!j.is_object())
            fail(Errc::StorageError, "invalid rules: expected a JSON object");
        if (auto c = j.find("capabilities"); c != j.end()) {
            r.capabilities.fs_read = c->value("fs_read", std::vector<std::string>{});
            r.capabilities.fs_write = c->value("fs_write", std::vector<std::string>{});
            r.capabilities.hosted_allowed = c->value("hosted_allowed", false);
            // Network grants are not supported; the flag is read and ignored.
            r.capabilities.network = false;
        }
        if (auto l = j.find("limits"); l != j.end()) {
            r.limits.op_budget = l->value("op_budget", r.limits.op_budget);
            r.limits.memory_cap = l->value("memory_cap", r.limits.memory_cap);
            r.limits.wall_timeout = std::chrono::milliseconds(l->value("wall_timeout_ms", r.limits.wall_timeout.count()));
        }
    } catch (const json::exception& e) {
        fail(Errc::StorageError, std::string("invalid rules: ") + e.what());
    }
    return r;
}

fs::path TrustStore::default_root()
{
    if (const char* home = std::getenv("UDFVAULT_HOME"); home && *home)
        return home;
    if (const char* home = std::getenv("HOME"); home && *home)
        return fs::path(home) / ".udfvault";
    if (const passwd* pw = ::getpwuid(::getuid()); pw && pw->pw_dir)
        return fs::path(pw->pw_dir) / ".udfvault";
    fail(Errc::StorageError, "cannot determine the trust store location; set UDFVAULT_HOME");
}

fs::path TrustStore::profile_dir(std::string_view name) const
{
    if (!valid_profile_name(name))
        fail(Errc::InvalidArgument, "invalid profile name '" + std::string(name) + "'");
    return root_ / "profiles" / std::string(name);
}

TrustStore TrustStore::open(const fs::path& root)
{
    TrustStore store(root);
    ensure_dir(store.profile_dir(kUntrusted) / "keys");
    if (!fs::exists(store.profile_dir(kUntrusted) / "rules.json"))
        write_atomic(store.profile_dir(kUntrusted) / "rules.json", deny_all().to_json());
    if (!fs::exists(store.profile_dir(kTrusted))) {
        ensure_dir(store.profile_dir(kTrusted) / "keys");
        write_atomic(store.profile_dir(kTrusted) / "rules.json", trusted_defaults().to_json());
    }
    std::map<PublicKey, std::string> seen;
    for (const auto& k : store.keys()) {
        auto [it, fresh] = seen.emplace(k.record.public_key, k.profile);
        if (!fresh)
            fail(Errc::DuplicateKey,
                 "key " + k.record.id() + " appears in both '" + it->second + "' and '" + k.profile + "'");
    }
    return store;
}

std::vector<std::string> TrustStore::profiles() const
{
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_ / "profiles", ec))
        if (entry.is_directory() && valid_profile_name(entry.path().filename().string()))
            out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

TrustProfile TrustStore::profile(std::string_view name) const
{
    const fs::path dir = profile_dir(name);
    if (!fs::is_directory(dir))
        fail(Errc::NotFound, "no trust profile named '" + std::string(name) + "'");
    TrustProfile p;
    p.name = std::string(name);
    p.key_dir = dir / "keys";
    const fs::path rules = dir / "rules.json";
    p.rules = fs::exists(rules) ? Rules::from_json(slurp(rules)) : deny_all();
    if (name == kUntrusted)
        p.rules.capabilities = {};
    return p;
}

std::vector<StoredKey> TrustStore::keys() const
{
    std::vector<StoredKey> out;
    for (const auto& name : profiles()) {
        std::error_code ec;
        const fs::path dir = root_ / "profiles" / name / "keys";
        for (const auto& entry : fs::directory_iterator(dir, ec)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".json")
                continue;
            StoredKey k;
            k.profile = name;
            k.file = entry.path();
            try {
                k.record = KeyRecord::from_json(slurp(entry.path()));
            } catch (const Error& e) {
                fail(Errc::StorageError, "unreadable key file " + entry.path().string() + ": " + e.what());
            }
            out.push_back(std::move(k));
        }
    }
    std::sort(out.begin(), out.end(), [](const StoredKey& a, const StoredKey& b) {
        return std::tie(a.profile, a.file) < std::tie(b.profile, b.file);
    });
    return out;
}

std::optional<StoredKey> TrustStore::locate(const PublicKey& key) const
{
    for (auto& k : keys())
        if (k.record.public_key == key)
            return k;
    return std::nullopt;
}

std::optional<std::string> TrustStore::profile_of(const PublicKey& key) const
{
    if (auto k = locate(key))
        return k->profile;
    return std::nullopt;
}

StoredKey TrustStore::import_key(const KeyRecord& key, std::string_view profile)
{
    std::lock_guard lock(*mutex_);
    if (auto existing = locate(key.public_key))
        fail(Errc::DuplicateKey, "key " + key.id() + " is already in profile '" + existing->profile + "'");
    const fs::path dir = profile_dir(profile) / "keys";
    ensure_dir(dir);
    StoredKey k{std::string(profile), key, dir / (key.id() + ".json")};
    write_atomic(k.file, key.to_json());
    return k;
}

TrustProfile TrustStore::resolve_profile(const KeyRecord& key)
{
    {
        std::lock_guard lock(*mutex_);
        if (auto found = locate(key.public_key))
            return profile(found->profile);
        const fs::path dir = profile_dir(kUntrusted) / "keys";
        ensure_dir(dir);
        write_atomic(dir / (key.id() + ".json"), key.to_json());
    }
    return profile(kUntrusted);
}

StoredKey TrustStore::move_key(std::string_view id, std::string_view target)
{
    std::lock_guard lock(*mutex_);
    std::vector<StoredKey> matches;
    for (auto& k : keys())
        if (k.record.id().starts_with(id) && !id.empty())
            matches.push_back(std::move(k));
    if (matches.empty())
        fail(Errc::NotFound, "no key with id '" + std::string(id) + "'");
    if (matches.size() > 1)
        fail(Errc::InvalidArgument, "key id prefix '" + std::string(id) + "' is ambiguous");
    StoredKey k = std::move(matches.front());
    const fs::path dir = profile_dir(target) / "keys";
    ensure_dir(dir);
    const fs::path dest = dir / k.file.filename();
    if (dest != k.file) {
        std::error_code ec;
        fs::rename(k.file, dest, ec);
        if (ec)
            fail(Errc::StorageError, "cannot move " + k.file.string() + ": " + ec.message());
    }
    k.profile = std::string(target);
    k.file = dest;
    return k;
}

} // namespace udfvault::trust
