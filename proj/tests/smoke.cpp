#include <cstdio>

#include "proca/datagen.hpp"
#include "proca/model.hpp"
#include "proca/optimizer.hpp"

int main() {
  using namespace proca;
  SceneSpec spec;
  spec.seed = 42;
  auto [source, target] = generate_pair<float>(spec, 4, 4);
  ModelConfig mc;
  mc.num_classes = spec.num_classes;
  auto model = SegModel<float>::init(mc, 1);
  auto fwd = forward(model, source.images);
  const float loss = supervised_ce_loss(fwd.prob, source.labels);
  std::printf("feat %dx%dx%dx%d prob %dx%dx%dx%d ce %.4f\n", fwd.features().n, fwd.features().c,
              fwd.features().h, fwd.features().w, fwd.prob.n, fwd.prob.c, fwd.prob.h, fwd.prob.w,
              loss);
  auto grads = model.zero_grads();
  Mat<float> dlog = ce_grad_logits(fwd.prob, source.labels);
  backward<float>(model, fwd, nullptr, &dlog, grads);
  SgdPoly<float> opt({}, 100);
  auto out = opt.step(model, grads, loss);
  std::printf("step applied=%d lr0=%.6g\n", out.applied ? 1 : 0, opt.lr_at(0));
  return out.applied && model.params_finite() ? 0 : 1;
}
