#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bacscan/model.hpp"

namespace bacscan {

inline constexpr std::string_view kIterateIdentifiers = "iterate_identifiers";
inline constexpr std::string_view kStripHeaders = "strip_headers";
inline constexpr std::string_view kMutateUrlParams = "mutate_url_params";
inline constexpr std::string_view kStripBody = "strip_body";
inline constexpr std::string_view kAppendHeaderNoise = "append_header_noise";
inline constexpr std::string_view kAppendJsonFields = "append_json_fields";

// One candidate edit produced by a modification hook.
struct Edit {
  BaseRequest request;
  std::string description;
};

// An Information Attack Method. Subclasses override whichever of the three
// modification hooks their strategy touches; generate() runs them in
// URL, headers, body order and drops edits that leave the request unchanged.
class InformationAttackMethod {
 public:
  virtual ~InformationAttackMethod() = default;

  virtual std::string_view name() const = 0;
  virtual std::vector<MutationTarget> targets() const = 0;

  std::vector<MutatedRequest> generate(const BaseRequest& base) const;

 protected:
  virtual std::vector<Edit> modify_url(const BaseRequest& base) const;
  virtual std::vector<Edit> modify_headers(const BaseRequest& base) const;
  virtual std::vector<Edit> modify_body(const BaseRequest& base) const;
};

// Replaces decimal identifiers in path segments, query values and top-level
// JSON fields with neighbouring values v-window .. v+window (never below 0).
class IdentifierIteration final : public InformationAttackMethod {
 public:
  explicit IdentifierIteration(int window = 2);
  std::string_view name() const override { return kIterateIdentifiers; }
  std::vector<MutationTarget> targets() const override {
    return {MutationTarget::kUrl, MutationTarget::kBody};
  }

 protected:
  std::vector<Edit> modify_url(const BaseRequest& base) const override;
  std::vector<Edit> modify_body(const BaseRequest& base) const override;

 private:
  std::vector<std::string> neighbours(std::string_view digits) const;
  int window_;
};

std::vector<std::string> default_auth_headers();

class HeaderRemoval final : public InformationAttackMethod {
 public:
  explicit HeaderRemoval(std::vector<std::string> auth_headers = default_auth_headers());
  std::string_view name() const override { return kStripHeaders; }
  std::vector<MutationTarget> targets() const override { return {MutationTarget::kHeaders}; }

 protected:
  std::vector<Edit> modify_headers(const BaseRequest& base) const override;

 private:
  std::vector<std::string> auth_headers_;
};

std::vector<std::string> default_url_payloads();

class UrlParameterTampering final : public InformationAttackMethod {
 public:
  explicit UrlParameterTampering(std::vector<std::string> payloads = default_url_payloads());
  std::string_view name() const override { return kMutateUrlParams; }
  std::vector<MutationTarget> targets() const override { return {MutationTarget::kUrl}; }

 protected:
  std::vector<Edit> modify_url(const BaseRequest& base) const override;

 private:
  std::vector<std::string> payloads_;
};

class BodyRemoval final : public InformationAttackMethod {
 public:
  std::string_view name() const override { return kStripBody; }
  std::vector<MutationTarget> targets() const override { return {MutationTarget::kBody}; }

 protected:
  std::vector<Edit> modify_body(const BaseRequest& base) const override;
};

std::vector<std::string> default_header_noise();

class HeaderNoise final : public InformationAttackMethod {
 public:
  explicit HeaderNoise(std::vector<std::string> payloads = default_header_noise());
  std::string_view name() const override { return kAppendHeaderNoise; }
  std::vector<MutationTarget> targets() const override { return {MutationTarget::kHeaders}; }

 protected:
  std::vector<Edit> modify_headers(const BaseRequest& base) const override;

 private:
  std::vector<std::string> payloads_;
};

nlohmann::ordered_json default_json_extras();

class JsonFieldInjection final : public InformationAttackMethod {
 public:
  // `fields` must be a JSON object; insertion order is emission order.
  explicit JsonFieldInjection(nlohmann::ordered_json fields = default_json_extras());
  std::string_view name() const override { return kAppendJsonFields; }
  std::vector<MutationTarget> targets() const override { return {MutationTarget::kBody}; }

 protected:
  std::vector<Edit> modify_body(const BaseRequest& base) const override;

 private:
  nlohmann::ordered_json fields_;
};

// Free-function forms of the six built-in methods.
std::vector<MutatedRequest> iterate_identifiers(const BaseRequest& base, int window);
std::vector<MutatedRequest> strip_headers(const BaseRequest& base,
                                          std::vector<std::string> auth_headers = default_auth_headers());
std::vector<MutatedRequest> mutate_url_params(const BaseRequest& base,
                                              std::vector<std::string> payloads);
std::vector<MutatedRequest> strip_body(const BaseRequest& base);
std::vector<MutatedRequest> append_header_noise(const BaseRequest& base,
                                                std::vector<std::string> payloads);
std::vector<MutatedRequest> append_json_fields(const BaseRequest& base,
                                               nlohmann::ordered_json extra_fields);

struct IamDescriptor {
  std::string name;
  std::vector<MutationTarget> targets;
  nlohmann::json config = nlohmann::json::object();
  bool enabled = true;
};

using IamFactory =
    std::function<std::unique_ptr<InformationAttackMethod>(const nlohmann::json& config)>;

// Maps IAM names to factories. New strategies register here; generate_all
// needs no change to pick them up.
class IamRegistry {
 public:
  static const IamRegistry& builtin();

  void add(std::string name, std::vector<MutationTarget> targets, IamFactory factory);
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;  // registration order
  std::unique_ptr<InformationAttackMethod> create(const IamDescriptor& descriptor) const;
  std::vector<IamDescriptor> default_descriptors() const;

 private:
  struct Entry {
    std::string name;
    std::vector<MutationTarget> targets;
    IamFactory factory;
  };
  std::vector<Entry> entries_;
};

// A validated, instantiated list of IAMs applied to many base requests.
class AttackPlan {
 public:
  // Throws ConfigError on duplicate or unknown names or bad per-IAM config.
  explicit AttackPlan(const std::vector<IamDescriptor>& descriptors,
                      const IamRegistry& registry = IamRegistry::builtin());

  // Concatenates enabled IAM outputs in plan order; a non-zero budget keeps
  // only the first `budget` mutations.
  std::vector<MutatedRequest> generate(const BaseRequest& base, std::size_t budget = 0) const;

  std::vector<std::string> names() const;
  const std::vector<IamDescriptor>& descriptors() const { return descriptors_; }

 private:
  std::vector<IamDescriptor> descriptors_;
  std::vector<std::unique_ptr<InformationAttackMethod>> methods_;
};

std::vector<MutatedRequest> generate_all(const BaseRequest& base,
                                         const std::vector<IamDescriptor>& registry,
                                         std::size_t budget = 0);

}  // namespace bacscan
