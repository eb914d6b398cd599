// Small end-to-end tour of the library: a synthetic world, cleaning, one SEIR-QD fit
// turned into quantiles, and a pooled forest, both scored against held-out truth.
#include <iostream>

#include "epiq/epiq.hpp"

int main() {
  using namespace epiq;
  pipeline::WorldSpec spec;
  spec.n_counties = 8;
  spec.seed = 7;
  const auto world = pipeline::make_world(spec);
  const auto observed = pipeline::generate_synthetic(world, 100);

  const Date start = observed.front().start + 86;
  const DateRange period{start, start + 13};
  pipeline::ModelData d;
  for (const auto& s : observed) d.series.push_back(data::clean_series(s.truncated(start - 1)));
  d.statics = pipeline::world_statics(world);
  const auto a = clustering::kmeans(clustering::county_features(d.series), {3, 300, 1});
  d.clusters = a.by_fips();
  d.layout = data::make_layout(d.series, d.statics, {15, 16, 17, 18, 19, 20, 21}, 14, 3);

  pipeline::ModelsConfig mc;
  mc.forest.forest.n_trees = 50;
  mc.seirqd.fit.restarts = 2;
  for (const std::string name : {"seirqd", "forest"}) {
    auto model = pipeline::make_model(name, mc, 42);
    const auto fc = model->forecast(d, start - 1);
    const auto rep = metrics::evaluate(fc, observed, period);
    std::cout << name << ": pinball " << rep.pinball << ", rmse " << rep.rmse << '\n';
  }
}
