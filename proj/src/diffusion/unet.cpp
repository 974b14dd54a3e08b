#include "diffusion/unet.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ctig::diffusion {

nlohmann::ordered_json UnetConfig::to_json() const {
  nlohmann::ordered_json j;
  j["in_ch"] = in_ch;
  j["base"] = base;
  j["mults"] = mults;
  j["n_res"] = n_res;
  j["attn_levels"] = attn_levels;
  j["mid_attn"] = mid_attn;
  j["time_dim"] = time_dim;
  j["emb_dim"] = emb_dim;
  j["cond_width"] = cond_width;
  j["img_h"] = img_h;
  j["img_w"] = img_w;
  j["init_seed"] = init_seed;
  return j;
}

UnetConfig UnetConfig::from_json(const nlohmann::ordered_json& j) {
  UnetConfig c;
  c.in_ch = j.value("in_ch", c.in_ch);
  c.base = j.value("base", c.base);
  c.mults = j.value("mults", c.mults);
  c.n_res = j.value("n_res", c.n_res);
  c.attn_levels = j.value("attn_levels", c.attn_levels);
  c.mid_attn = j.value("mid_attn", c.mid_attn);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.emb_dim = j.value("emb_dim", c.emb_dim);
  c.cond_width = j.value("cond_width", c.cond_width);
  c.img_h = j.value("img_h", c.img_h);
  c.img_w = j.value("img_w", c.img_w);
  c.init_seed = j.value("init_seed", uint64_t(0));
  return c;
}

// ----------------------------------------------------------------- ResBlock

void ResBlock::init(int64_t cin_, int64_t cout_, int64_t emb_dim, Rng& rng,
                    const std::string& name) {
  cin = cin_;
  cout = cout_;
  n1.init(cin, 0, rng, name + ".n1");
  conv1.init(cin, cout, 3, 1, 1, rng, name + ".conv1");
  emb_proj.init(emb_dim, cout, rng, name + ".emb_proj");
  n2.init(cout, 0, rng, name + ".n2");
  conv2.init(cout, cout, 3, 1, 1, rng, name + ".conv2", /*zero_init=*/true);
  if (cin != cout) {
    skip.emplace();
    skip->init(cin, cout, 1, 1, 0, rng, name + ".skip");
  }
}

void ResBlock::collect(nn::ParamRefs& ps) {
  n1.collect(ps);
  conv1.collect(ps);
  emb_proj.collect(ps);
  n2.collect(ps);
  conv2.collect(ps);
  if (skip) skip->collect(ps);
}

Tensor ResBlock::forward(const Tensor& x, const Tensor& emb) {
  Tensor h = conv1.forward(s1.forward(n1.forward(x)));
  Tensor e = emb_proj.forward(semb.forward(emb));  // (B, cout)
  int64_t B = h.dim(0), HW = h.dim(2) * h.dim(3);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < cout; ++c) {
      real ev = e[b * cout + c];
      real* row = h.data() + (b * cout + c) * HW;
      for (int64_t p = 0; p < HW; ++p) row[p] += ev;
    }
  Tensor out = conv2.forward(s2.forward(n2.forward(h)));
  if (skip) {
    Tensor sx = skip->forward(x);
    out.add_(sx);
  } else {
    out.add_(x);
  }
  return out;
}

Tensor ResBlock::backward(const Tensor& dy, Tensor& demb) {
  Tensor dh = n2.backward(s2.backward(conv2.backward(dy)));
  int64_t B = dh.dim(0), HW = dh.dim(2) * dh.dim(3);
  Tensor de({B, cout});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < cout; ++c) {
      const real* row = dh.data() + (b * cout + c) * HW;
      double s = 0;
      for (int64_t p = 0; p < HW; ++p) s += row[p];
      de[b * cout + c] = static_cast<real>(s);
    }
  Tensor de2 = semb.backward(emb_proj.backward(de));
  demb.add_(de2);
  Tensor dx = n1.backward(s1.backward(conv1.backward(dh)));
  if (skip) {
    Tensor ds = skip->backward(dy);
    dx.add_(ds);
  } else {
    dx.add_(dy);
  }
  return dx;
}

// --------------------------------------------------------------------- Unet

Unet::Unet(const UnetConfig& cfg) : cfg_(cfg) {
  Rng rng(hash_combine(cfg.init_seed, 0x554e4554u));
  const int64_t emb = cfg.embed_width();
  const int L = static_cast<int>(cfg.mults.size());

  time_fc1_.init(cfg.time_dim, emb, rng, "unet.time_fc1");
  time_fc2_.init(emb, emb, rng, "unet.time_fc2");
  fuse_.init(emb + 3 * cfg.cond_width, emb, rng, "unet.fuse");
  conv_in_.init(cfg.in_ch, cfg.base, 3, 1, 1, rng, "unet.conv_in");

  auto has_attn = [&](int level) {
    return std::find(cfg.attn_levels.begin(), cfg.attn_levels.end(), level) !=
           cfg.attn_levels.end();
  };

  std::vector<int64_t> skip_chans;
  int64_t ch = cfg.base;
  skip_chans.push_back(ch);
  plan_.push_back({Op::ConvIn, 0, false, 0});

  int attn_count = 0;
  // Pre-count attention blocks so the vector never reallocates mid-init.
  for (int i = 0; i < L; ++i)
    if (has_attn(i)) attn_count += cfg.n_res + (cfg.n_res + 1);
  attns_.reserve(static_cast<size_t>(attn_count));
  down_res_.reserve(static_cast<size_t>(L * cfg.n_res));
  up_res_.reserve(static_cast<size_t>(L * (cfg.n_res + 1)));
  downs_.reserve(static_cast<size_t>(L));
  ups_.reserve(static_cast<size_t>(L));
  up_convs_.reserve(static_cast<size_t>(L));

  for (int i = 0; i < L; ++i) {
    int64_t cout = static_cast<int64_t>(cfg.base) * cfg.mults[static_cast<size_t>(i)];
    for (int j = 0; j < cfg.n_res; ++j) {
      down_res_.emplace_back();
      down_res_.back().init(ch, cout, emb, rng,
                            "unet.down" + std::to_string(i) + ".res" + std::to_string(j));
      ch = cout;
      Step st{Op::DownRes, static_cast<int>(down_res_.size()) - 1, false, 0};
      if (has_attn(i)) {
        attns_.emplace_back();
        attns_.back().init(ch, rng, "unet.down" + std::to_string(i) + ".attn" + std::to_string(j));
        st.attn = true;
        st.attn_idx = static_cast<int>(attns_.size()) - 1;
      }
      plan_.push_back(st);
      skip_chans.push_back(ch);
    }
    if (i != L - 1) {
      downs_.emplace_back();
      downs_.back().init(ch, ch, 3, 2, 1, rng, "unet.down" + std::to_string(i) + ".ds");
      plan_.push_back({Op::Down, static_cast<int>(downs_.size()) - 1, false, 0});
      skip_chans.push_back(ch);
    }
  }

  mid1_.init(ch, ch, emb, rng, "unet.mid.res0");
  plan_.push_back({Op::Mid1, 0, false, 0});
  if (cfg.mid_attn) {
    mid_attn_.emplace();
    mid_attn_->init(ch, rng, "unet.mid.attn");
    plan_.push_back({Op::MidAttn, 0, false, 0});
  }
  mid2_.init(ch, ch, emb, rng, "unet.mid.res1");
  plan_.push_back({Op::Mid2, 0, false, 0});

  for (int i = L - 1; i >= 0; --i) {
    int64_t cout = static_cast<int64_t>(cfg.base) * cfg.mults[static_cast<size_t>(i)];
    for (int j = 0; j <= cfg.n_res; ++j) {
      int64_t ich = skip_chans.back();
      skip_chans.pop_back();
      up_res_.emplace_back();
      up_res_.back().init(ch + ich, cout, emb, rng,
                          "unet.up" + std::to_string(i) + ".res" + std::to_string(j));
      up_skip_channels_.push_back(static_cast<int>(ich));
      ch = cout;
      Step st{Op::UpRes, static_cast<int>(up_res_.size()) - 1, false, 0};
      if (has_attn(i)) {
        attns_.emplace_back();
        attns_.back().init(ch, rng, "unet.up" + std::to_string(i) + ".attn" + std::to_string(j));
        st.attn = true;
        st.attn_idx = static_cast<int>(attns_.size()) - 1;
      }
      plan_.push_back(st);
    }
    if (i != 0) {
      ups_.emplace_back();
      up_convs_.emplace_back();
      up_convs_.back().init(ch, ch, 3, 1, 1, rng, "unet.up" + std::to_string(i) + ".us");
      plan_.push_back({Op::Up, static_cast<int>(up_convs_.size()) - 1, false, 0});
    }
  }

  out_norm_.init(ch, 0, rng, "unet.out_norm");
  conv_out_.init(ch, cfg.in_ch, 3, 1, 1, rng, "unet.conv_out", /*zero_init=*/true);
  plan_.push_back({Op::Out, 0, false, 0});

  consumed_.assign(up_res_.size(), -1);
  push_at_.assign(plan_.size(), -1);
}

Tensor Unet::time_embedding(const std::vector<int>& nsteps) const {
  const int64_t B = static_cast<int64_t>(nsteps.size());
  const int64_t half = cfg_.time_dim / 2;
  Tensor t({B, cfg_.time_dim});
  for (int64_t b = 0; b < B; ++b) {
    double n = static_cast<double>(nsteps[static_cast<size_t>(b)]);
    for (int64_t i = 0; i < half; ++i) {
      double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                             static_cast<double>(half));
      double a = n * freq;
      t[b * cfg_.time_dim + i] = static_cast<real>(std::cos(a));
      t[b * cfg_.time_dim + half + i] = static_cast<real>(std::sin(a));
    }
  }
  return t;
}

Tensor Unet::forward(const Tensor& x, const std::vector<int>& nsteps, const Tensor& cond) {
  const int64_t B = x.dim(0);
  if (static_cast<int64_t>(nsteps.size()) != B)
    throw InvalidArg("unet: nsteps size must match batch");
  if (cond.dim(0) != B || cond.dim(1) != 3 * cfg_.cond_width)
    throw InvalidArg("unet: cond must be (B, 3*cond_width), got " + shape_str(cond));
  batch_ = B;

  t_sin_ = time_embedding(nsteps);
  Tensor t = time_fc2_.forward(time_act_.forward(time_fc1_.forward(t_sin_)));
  const int64_t emb_w = cfg_.embed_width();
  Tensor fuse_in({B, emb_w + 3 * cfg_.cond_width});
  for (int64_t b = 0; b < B; ++b) {
    std::copy_n(t.data() + b * emb_w, emb_w, fuse_in.data() + b * (emb_w + 3 * cfg_.cond_width));
    std::copy_n(cond.data() + b * 3 * cfg_.cond_width, 3 * cfg_.cond_width,
                fuse_in.data() + b * (emb_w + 3 * cfg_.cond_width) + emb_w);
  }
  emb_ = fuse_.forward(fuse_in);

  skips_.clear();
  Tensor h;
  int up_idx = 0;
  for (size_t si = 0; si < plan_.size(); ++si) {
    Step& st = plan_[si];
    push_at_[si] = -1;
    switch (st.op) {
      case Op::ConvIn:
        h = conv_in_.forward(x);
        push_at_[si] = static_cast<int>(skips_.size());
        skips_.push_back(h);
        break;
      case Op::DownRes:
        h = down_res_[static_cast<size_t>(st.idx)].forward(h, emb_);
        if (st.attn) h = attns_[static_cast<size_t>(st.attn_idx)].forward(h);
        push_at_[si] = static_cast<int>(skips_.size());
        skips_.push_back(h);
        break;
      case Op::Down:
        h = downs_[static_cast<size_t>(st.idx)].forward(h);
        push_at_[si] = static_cast<int>(skips_.size());
        skips_.push_back(h);
        break;
      case Op::Mid1:
        h = mid1_.forward(h, emb_);
        break;
      case Op::MidAttn:
        h = mid_attn_->forward(h);
        break;
      case Op::Mid2:
        h = mid2_.forward(h, emb_);
        break;
      case Op::UpRes: {
        int consumed = static_cast<int>(skips_.size()) - 1;
        Tensor s = std::move(skips_.back());
        skips_.pop_back();
        consumed_[static_cast<size_t>(st.idx)] = consumed;
        Tensor cat = nn::concat_channels(h, s);
        h = up_res_[static_cast<size_t>(st.idx)].forward(cat, emb_);
        if (st.attn) h = attns_[static_cast<size_t>(st.attn_idx)].forward(h);
        ++up_idx;
        break;
      }
      case Op::Up:
        h = ups_[static_cast<size_t>(st.idx)].forward(h);
        h = up_convs_[static_cast<size_t>(st.idx)].forward(h);
        break;
      case Op::Out:
        h = conv_out_.forward(out_act_.forward(out_norm_.forward(h)));
        break;
    }
  }
  (void)up_idx;
  return h;
}

Tensor Unet::backward(const Tensor& dy) {
  const int64_t B = batch_;
  const int64_t emb_w = cfg_.embed_width();
  Tensor demb({B, emb_w});
  // dskips is indexed by skip id; every push is consumed by exactly one
  // UpRes block, so the id range equals the UpRes count.
  std::vector<Tensor> dskips(up_res_.size());

  Tensor dh = dy;
  for (size_t si = plan_.size(); si-- > 0;) {
    const Step& st = plan_[si];
    switch (st.op) {
      case Op::Out:
        dh = out_norm_.backward(out_act_.backward(conv_out_.backward(dh)));
        break;
      case Op::Up:
        dh = up_convs_[static_cast<size_t>(st.idx)].backward(dh);
        dh = ups_[static_cast<size_t>(st.idx)].backward(dh);
        break;
      case Op::UpRes: {
        if (st.attn) dh = attns_[static_cast<size_t>(st.attn_idx)].backward(dh);
        Tensor dcat = up_res_[static_cast<size_t>(st.idx)].backward(dh, demb);
        int64_t skip_c = up_skip_channels_[static_cast<size_t>(st.idx)];
        int64_t h_c = dcat.dim(1) - skip_c;
        Tensor da, db;
        nn::split_channels(dcat, h_c, da, db);
        dh = std::move(da);
        int cid = consumed_[static_cast<size_t>(st.idx)];
        dskips[static_cast<size_t>(cid)] = std::move(db);
        break;
      }
      case Op::Mid2:
        dh = mid2_.backward(dh, demb);
        break;
      case Op::MidAttn:
        dh = mid_attn_->backward(dh);
        break;
      case Op::Mid1:
        dh = mid1_.backward(dh, demb);
        break;
      case Op::Down: {
        int pid = push_at_[si];
        if (pid >= 0 && !dskips[static_cast<size_t>(pid)].empty())
          dh.add_(dskips[static_cast<size_t>(pid)]);
        dh = downs_[static_cast<size_t>(st.idx)].backward(dh);
        break;
      }
      case Op::DownRes: {
        int pid = push_at_[si];
        if (pid >= 0 && !dskips[static_cast<size_t>(pid)].empty())
          dh.add_(dskips[static_cast<size_t>(pid)]);
        if (st.attn) dh = attns_[static_cast<size_t>(st.attn_idx)].backward(dh);
        dh = down_res_[static_cast<size_t>(st.idx)].backward(dh, demb);
        break;
      }
      case Op::ConvIn: {
        int pid = push_at_[si];
        if (pid >= 0 && !dskips[static_cast<size_t>(pid)].empty())
          dh.add_(dskips[static_cast<size_t>(pid)]);
        dh = conv_in_.backward(dh);  // gradient w.r.t. x, unused
        break;
      }
    }
  }

  Tensor dfuse_in = fuse_.backward(demb);
  Tensor dt({B, emb_w});
  Tensor dcond({B, 3 * cfg_.cond_width});
  for (int64_t b = 0; b < B; ++b) {
    std::copy_n(dfuse_in.data() + b * (emb_w + 3 * cfg_.cond_width), emb_w, dt.data() + b * emb_w);
    std::copy_n(dfuse_in.data() + b * (emb_w + 3 * cfg_.cond_width) + emb_w,
                3 * cfg_.cond_width, dcond.data() + b * 3 * cfg_.cond_width);
  }
  time_fc1_.backward(time_act_.backward(time_fc2_.backward(dt)));
  return dcond;
}

nn::ParamRefs Unet::params() {
  nn::ParamRefs ps;
  time_fc1_.collect(ps);
  time_fc2_.collect(ps);
  fuse_.collect(ps);
  conv_in_.collect(ps);
  for (auto& r : down_res_) r.collect(ps);
  for (auto& d : downs_) d.collect(ps);
  mid1_.collect(ps);
  if (mid_attn_) mid_attn_->collect(ps);
  mid2_.collect(ps);
  for (auto& r : up_res_) r.collect(ps);
  for (auto& c : up_convs_) c.collect(ps);
  for (auto& a : attns_) a.collect(ps);
  out_norm_.collect(ps);
  conv_out_.collect(ps);
  return ps;
}

int64_t Unet::param_count() {
  int64_t n = 0;
  for (nn::Param* p : params()) n += p->w.numel();
  return n;
}

void Unet::save(Checkpoint& ck, const std::string& prefix) const {
  for (nn::Param* p : const_cast<Unet*>(this)->params()) ck.put(prefix + p->name, p->w);
}

void Unet::load(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    const Tensor& t = ck.get(prefix + p->name);
    if (t.shape != p->w.shape) throw IoError("checkpoint shape mismatch for " + p->name);
    p->w = t;
  }
}

}  // namespace ctig::diffusion
