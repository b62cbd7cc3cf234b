#pragma once

// Signing identities and trust profiles.
//
// Store layout under the root (UDFVAULT_HOME, else ~/.udfvault):
//
//   identity/public.json          this user's KeyRecord
//   identity/secret.key           base64 Ed25519 seed, mode 0600
//   profiles/<name>/rules.json    capabilities + limits (absent: deny-all)
//   profiles/<name>/keys/<id>.json
//
// "untrusted" always exists and is deny-all whatever its rules.json says.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udfvault/buffer.hpp"
#include "udfvault/runtime.hpp"

namespace udfvault::trust {

inline constexpr std::string_view kAlgorithm = "Ed25519";
inline constexpr std::string_view kUntrusted = "untrusted";
inline constexpr std::string_view kTrusted = "trusted";

using PublicKey = std::array<std::uint8_t, 32>;
using Seed = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws MalformedKey on invalid input.
Bytes base64_decode(std::string_view text);

/// Throws MalformedKey unless `text` decodes to exactly 32 bytes.
PublicKey public_key_from_base64(std::string_view text);

/// Stable short identifier: hex of a 64-bit BLAKE2b digest of the key.
std::string key_id(const PublicKey& key);

struct KeyRecord {
    std::string algorithm{kAlgorithm};
    PublicKey public_key{};
    std::string owner_name;
    std::string owner_email;

    std::string id() const { return key_id(public_key); }
    std::string to_json() const;
    /// Throws MalformedKey.
    static KeyRecord from_json(std::string_view text);

    friend bool operator==(const KeyRecord&, const KeyRecord&) = default;
};

struct Owner {
    std::string name;
    std::string email;
};

/// Owner details taken from the environment (UDFVAULT_NAME/UDFVAULT_EMAIL,
/// falling back to the login name).
Owner default_owner();

class SigningKey {
public:
    static SigningKey from_seed(const Seed& seed);
    static SigningKey generate();

    const PublicKey& public_key() const noexcept { return public_; }
    const Seed& seed() const noexcept { return seed_; }
    Signature sign(std::span<const std::uint8_t> message) const;

private:
    Seed seed_{};
    PublicKey public_{};
    std::array<std::uint8_t, 64> secret_{};
};

struct Identity {
    KeyRecord record;
    SigningKey key;
};

/// Loads the identity under `root`/identity, creating it on first use.
/// Throws StorageError naming the offending file.
Identity ensure_keypair(const std::filesystem::path& root, const Owner& owner);

bool verify(const PublicKey& key, std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature);

struct Rules {
    runtime::Capabilities capabilities;
    runtime::Limits limits;

    std::string to_json() const;
    /// Throws StorageError.
    static Rules from_json(std::string_view text);
};

struct TrustProfile {
    std::string name;
    Rules rules;
    std::filesystem::path key_dir;
};

struct StoredKey {
    std::string profile;
    KeyRecord record;
    std::filesystem::path file;
};

class TrustStore {
public:
    /// Creates the layout if needed ("untrusted" deny-all, "trusted" with hosted
    /// backends allowed) and validates it. Throws DuplicateKey when one key sits
    /// in two profiles, StorageError on unreadable files.
    static TrustStore open(const std::filesystem::path& root);
    static std::filesystem::path default_root();

    const std::filesystem::path& root() const noexcept { return root_; }

    /// The profile whose key directory holds `key`. Unknown keys are imported
    /// into "untrusted" first. Never fails for a well-formed key.
    TrustProfile resolve_profile(const KeyRecord& key);

    TrustProfile profile(std::string_view name) const;
    std::vector<std::string> profiles() const;
    std::vector<StoredKey> keys() const;
    /// Read-only lookup; never imports.
    std::optional<std::string> profile_of(const PublicKey& key) const;

    /// Throws DuplicateKey if already present anywhere.
    StoredKey import_key(const KeyRecord& key, std::string_view profile = kUntrusted);
    /// Moves by id or unique id prefix; the target profile directory is created
    /// if missing. Throws NotFound.
    StoredKey move_key(std::string_view id, std::string_view profile);

private:
    explicit TrustStore(std::filesystem::path root) : root_(std::move(root)) {}

    std::optional<StoredKey> locate(const PublicKey& key) const;
    std::filesystem::path profile_dir(std::string_view name) const;

    std::filesystem::path root_;
    // Serializes imports and moves within this process; file renames keep
    // other processes from seeing partial key files.
    std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

} // namespace udfvault::trust
