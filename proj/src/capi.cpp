#include "fcl/fcl.h"

#include <exception>
#include <string>

#include "common.hpp"
#include "runner.hpp"

struct fcl_ctx {
  std::string error;
};

namespace {

int dispatch(fcl_ctx* ctx, const char* config_json, void (*fn)(const std::string&)) {
  if (!ctx) return 1;
  ctx->error.clear();
  if (!config_json) {
    ctx->error = "config_json is null";
    return 1;
  }
  try {
    fn(config_json);
    return 0;
  } catch (const fcl::io_error& e) {
    ctx->error = e.what();
    return 2;
  } catch (const std::invalid_argument& e) {
    ctx->error = e.what();
    return 1;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return 1;
  }
}

}  // namespace

extern "C" {

fcl_ctx* fcl_ctx_new(void) { return new (std::nothrow) fcl_ctx; }

void fcl_ctx_free(fcl_ctx* ctx) { delete ctx; }

const char* fcl_ctx_error(const fcl_ctx* ctx) { return ctx ? ctx->error.c_str() : ""; }

int fcl_gen(fcl_ctx* ctx, const char* config_json) {
  return dispatch(ctx, config_json, fcl::run_gen);
}

int fcl_train(fcl_ctx* ctx, const char* config_json) {
  return dispatch(ctx, config_json, fcl::run_train);
}

int fcl_eval(fcl_ctx* ctx, const char* config_json) {
  return dispatch(ctx, config_json, fcl::run_eval);
}

int fcl_audit(fcl_ctx* ctx, const char* config_json) {
  return dispatch(ctx, config_json, fcl::run_audit);
}

int fcl_dump_embeddings(fcl_ctx* ctx, const char* config_json) {
  return dispatch(ctx, config_json, fcl::run_dump_embeddings);
}

}  // extern "C"
