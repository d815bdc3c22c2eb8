#include <algorithm>
#include <string>

#include "boba/aggregation.hpp"
#include "boba/error.hpp"

namespace boba {
namespace {

AggregationResult wrap_all(Vector aggregate, int n) {
  AggregationResult r;
  r.aggregate = std::move(aggregate);
  r.accepted.assign(static_cast<size_t>(n), true);
  return r;
}

const Matrix& server_of(const AggregationInput& in, const std::string& name) {
  require(in.server_gradients != nullptr, ErrorCode::kMissingServerGradients,
          name + " needs server gradients");
  return *in.server_gradients;
}

AggregationResult run_rejection(const AggregationInput& in, RejectionVariant variant) {
  require(in.server_loss != nullptr && in.global_params != nullptr, ErrorCode::kInvalidInput,
          "loss-based rejection needs server data and the global model");
  return loss_rejection(in.gradients, in.f, variant, *in.server_loss, *in.global_params,
                        in.learning_rate);
}

}  // namespace

const std::vector<std::string>& aggregator_names() {
  static const std::vector<std::string> names = {
      "average", "coomed", "trmean", "krum",   "mkrum", "geomed", "fltrust",
      "selfrej", "avgrej", "bkrum",  "bmkrum", "boba",  "boba-es"};
  return names;
}

bool needs_server_gradients(const std::string& name) {
  return name == "boba" || name == "boba-es" || name == "fltrust";
}

bool needs_server_loss(const std::string& name) { return name == "selfrej" || name == "avgrej"; }

Aggregator make_aggregator(const AggregatorSpec& spec) {
  const std::string& name = spec.name;
  if (name == "average") {
    return [](const AggregationInput& in) { return wrap_all(average(in.gradients), in.num_clients()); };
  }
  if (name == "coomed") {
    return [](const AggregationInput& in) {
      return wrap_all(coordinate_median(in.gradients), in.num_clients());
    };
  }
  if (name == "trmean") {
    return [](const AggregationInput& in) {
      return wrap_all(trimmed_mean(in.gradients, in.f), in.num_clients());
    };
  }
  if (name == "krum") {
    return [](const AggregationInput& in) { return krum(in.gradients, in.f, 1); };
  }
  if (name == "mkrum") {
    return [](const AggregationInput& in) { return krum(in.gradients, in.f, in.num_clients() - in.f); };
  }
  if (name == "geomed") {
    return [tol = spec.geomed_tol, iters = spec.geomed_max_iter](const AggregationInput& in) {
      return wrap_all(geometric_median(in.gradients, tol, iters).point, in.num_clients());
    };
  }
  if (name == "fltrust") {
    return [](const AggregationInput& in) {
      return wrap_all(fltrust(in.gradients, server_of(in, "fltrust")), in.num_clients());
    };
  }
  if (name == "selfrej") {
    return [](const AggregationInput& in) { return run_rejection(in, RejectionVariant::kSelf); };
  }
  if (name == "avgrej") {
    return [](const AggregationInput& in) { return run_rejection(in, RejectionVariant::kAverage); };
  }
  if (name == "bkrum" || name == "bmkrum") {
    const bool multi = name == "bmkrum";
    return [s = spec.bucket_size, multi](const AggregationInput& in) {
      return bucketing(in, s, [multi](const AggregationInput& b) {
        return krum(b.gradients, b.f, multi ? b.num_clients() - b.f : 1);
      });
    };
  }
  if (name == "boba" || name == "boba-es") {
    BobaParams params = spec.boba;
    params.mode = name == "boba" ? FitMode::kAlternating : FitMode::kExhaustive;
    return [params](const AggregationInput& in) { return boba_aggregate(in, params); };
  }
  throw Error(ErrorCode::kConfig, "unknown aggregator '" + name + "'");
}

}  // namespace boba
