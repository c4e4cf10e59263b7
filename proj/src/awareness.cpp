#include <algorithm>
#include <cctype>
#include <map>

#include "wellsim/error.hpp"
#include "wellsim/schema.hpp"

namespace wellsim {

namespace {

struct DomainInfo {
  AwarenessDomain domain;
  const char* name;
  int max_count;  // 0 for categorical domains
  std::vector<int> points_by_count;
  std::vector<std::string> aware;  // categorical responses worth one point
};

const std::vector<DomainInfo>& domain_table() {
  static const std::vector<DomainInfo> table{
      {AwarenessDomain::well_age, "well_age", 0, {},
       {"0-5 years", "5-10 years", "10-20 years", "20-30 years", "30-50 years", "> 50 years"}},
      {AwarenessDomain::well_depth, "well_depth", 0, {},
       {"< 10 ft (3m)", "10-50 ft (3-15m)", "50-100 ft (15-30m)", "100-200 ft (30-60m)",
        "200-300 ft (60-90m)", "> 300 ft (90m)"}},
      // six features; five or more recognised earn the domain maximum
      {AwarenessDomain::well_features, "well_features", 6, {0, 1, 2, 3, 4, 5, 5}, {}},
      {AwarenessDomain::treatment_use, "treatment_use", 0, {}, {"Yes", "No"}},
      {AwarenessDomain::previous_test, "previous_test", 0, {}, {"Yes", "No"}},
      {AwarenessDomain::relevant_pathogens, "relevant_pathogens", 6, {0, 1, 1, 2, 2, 3, 3}, {}},
      {AwarenessDomain::pathogen_sources, "pathogen_sources", 4, {0, 1, 1, 2, 2}, {}},
  };
  return table;
}

const DomainInfo& info(AwarenessDomain d) {
  for (const auto& i : domain_table())
    if (i.domain == d) return i;
  throw SchemaError("unknown awareness domain");
}

const std::string kDontKnow = "Don't know";

}  // namespace

std::string to_string(AwarenessDomain d) { return info(d).name; }

AwarenessDomain awareness_domain_from_string(const std::string& s) {
  for (const auto& i : domain_table())
    if (s == i.name) return i.domain;
  throw SchemaError("unknown awareness domain '" + s + "'");
}

const std::vector<AwarenessDomain>& all_awareness_domains() {
  static const std::vector<AwarenessDomain> all = [] {
    std::vector<AwarenessDomain> v;
    for (const auto& i : domain_table()) v.push_back(i.domain);
    return v;
  }();
  return all;
}

const std::vector<std::string>& response_categories(AwarenessDomain d) {
  static const std::map<AwarenessDomain, std::vector<std::string>> cats = [] {
    std::map<AwarenessDomain, std::vector<std::string>> m;
    for (const auto& i : domain_table()) {
      std::vector<std::string> v;
      if (i.max_count > 0) {
        for (int n = 0; n <= i.max_count; ++n) v.push_back("aware-of-" + std::to_string(n));
      } else {
        v = i.aware;
        v.push_back(kDontKnow);
      }
      m.emplace(i.domain, std::move(v));
    }
    return m;
  }();
  return cats.at(d);
}

int max_count(AwarenessDomain d) { return info(d).max_count; }

int max_points(AwarenessDomain d) {
  const auto& i = info(d);
  if (i.max_count == 0) return 1;
  return *std::max_element(i.points_by_count.begin(), i.points_by_count.end());
}

int score_domain(AwarenessDomain domain, const std::string& response) {
  const auto& i = info(domain);
  if (i.max_count > 0) {
    const std::string prefix = "aware-of-";
    if (response.rfind(prefix, 0) == 0) {
      std::string num = response.substr(prefix.size());
      if (!num.empty() && std::all_of(num.begin(), num.end(), ::isdigit) && num.size() <= 2) {
        int n = std::stoi(num);
        if (n <= i.max_count) return i.points_by_count[static_cast<std::size_t>(n)];
      }
    }
  } else {
    if (response == "Aware") return 1;
    if (response == "Unaware" || response == kDontKnow) return 0;
    if (std::find(i.aware.begin(), i.aware.end(), response) != i.aware.end()) return 1;
  }
  throw SchemaError("unrecognised response '" + response + "' for awareness domain '" + i.name + "'");
}

AwarenessScore score_awareness(const std::map<std::string, std::string>& answers) {
  AwarenessScore score;
  for (const auto& [domain, response] : answers) {
    int pts = score_domain(awareness_domain_from_string(domain), response);
    score.components[domain] = pts;
    score.total += pts;
  }
  return score;
}

}  // namespace wellsim
