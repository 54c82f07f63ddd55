#pragma once

// Method of moving asymptotes (Svanberg 1987) in the form of the 2007 mmasub
// code: convex separable approximations around moving asymptotes, solved by a
// primal-dual interior point method.
//
//   min  f0(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
//   s.t. f_i(x) - a_i z - y_i <= 0,  xmin <= x <= xmax,  y, z >= 0
//
// The artificial y_i are the feasibility relaxation: with large c_i they stay
// zero whenever the linearized problem is feasible.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "pneumo/errors.hpp"

namespace pneumo {

struct MmaSettings {
  double move = 0.1;        // absolute move limit, fraction of (xmax - xmin)
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double albefa = 0.1;
  double raa0 = 1e-5;
  double epsimin = 1e-7;    // final barrier parameter of the subproblem
  double a0 = 1.0;
  double c = 1000.0;
  double d = 1.0;
};

struct MmaStepInfo {
  int newton_iterations = 0;
  double max_relaxation = 0.0;          // max y_i; > 0 means the subproblem was relaxed
  std::vector<double> residual_norms;   // per barrier level, after the Newton loop
  Eigen::VectorXd multipliers;          // lambda, one per constraint
};

class Mma {
 public:
  Mma(int n, int m, MmaSettings settings = {})
      : n_(n), m_(m), s_(settings), a_(Eigen::VectorXd::Zero(m)), c_(Eigen::VectorXd::Constant(m, settings.c)),
        d_(Eigen::VectorXd::Constant(m, settings.d)) {
    if (n <= 0 || m < 0) throw ContractViolation("mma: bad problem size");
  }

  int num_variables() const { return n_; }
  int num_constraints() const { return m_; }
  int iteration() const { return iter_; }
  const Eigen::VectorXd& lower_asymptote() const { return low_; }
  const Eigen::VectorXd& upper_asymptote() const { return upp_; }
  const MmaStepInfo& last_step() const { return info_; }

  // One outer MMA iteration. `x` is overwritten with the new iterate.
  // dg is m x n (row i = gradient of constraint i).
  void update(Eigen::VectorXd& x, const Eigen::VectorXd& xmin, const Eigen::VectorXd& xmax, const Eigen::VectorXd& df0,
              const Eigen::VectorXd& g, const Eigen::MatrixXd& dg) {
    if (x.size() != n_ || xmin.size() != n_ || xmax.size() != n_ || df0.size() != n_ || g.size() != m_ ||
        dg.rows() != m_ || dg.cols() != n_)
      throw ContractViolation("mma: argument shapes do not match problem size");
    if (!df0.allFinite() || !g.allFinite() || !dg.allFinite()) throw NumericalError("mma: non-finite gradient");
    ++iter_;
    const Eigen::ArrayXd range = (xmax - xmin).array();
    const Eigen::ArrayXd xv = x.array();

    if (iter_ <= 2) {
      low_ = (xv - s_.asyinit * range).matrix();
      upp_ = (xv + s_.asyinit * range).matrix();
    } else {
      const Eigen::ArrayXd zzz = (xv - xold1_.array()) * (xold1_.array() - xold2_.array());
      Eigen::ArrayXd factor = Eigen::ArrayXd::Ones(n_);
      for (int j = 0; j < n_; ++j) {
        if (zzz[j] > 0.0) factor[j] = s_.asyincr;
        else if (zzz[j] < 0.0) factor[j] = s_.asydecr;
      }
      Eigen::ArrayXd low = xv - factor * (xold1_.array() - low_.array());
      Eigen::ArrayXd upp = xv + factor * (upp_.array() - xold1_.array());
      low = low.max(xv - 10.0 * range).min(xv - 0.01 * range);
      upp = upp.min(xv + 10.0 * range).max(xv + 0.01 * range);
      low_ = low.matrix();
      upp_ = upp.matrix();
    }
    const Eigen::ArrayXd lowa = low_.array();
    const Eigen::ArrayXd uppa = upp_.array();
    const Eigen::ArrayXd alfa =
        (lowa + s_.albefa * (xv - lowa)).max(xv - s_.move * range).max(xmin.array());
    const Eigen::ArrayXd beta =
        (uppa - s_.albefa * (uppa - xv)).min(xv + s_.move * range).min(xmax.array());

    const Eigen::ArrayXd xmamiinv = 1.0 / range.max(1e-5);
    const Eigen::ArrayXd ux1 = uppa - xv;
    const Eigen::ArrayXd xl1 = xv - lowa;
    const Eigen::ArrayXd ux2 = ux1.square();
    const Eigen::ArrayXd xl2 = xl1.square();

    const Eigen::ArrayXd dfp = df0.array().max(0.0);
    const Eigen::ArrayXd dfm = (-df0.array()).max(0.0);
    const Eigen::ArrayXd pq0 = 0.001 * (dfp + dfm) + s_.raa0 * xmamiinv;
    const Eigen::ArrayXd p0 = (dfp + pq0) * ux2;
    const Eigen::ArrayXd q0 = (dfm + pq0) * xl2;

    Eigen::MatrixXd pm(m_, n_);
    Eigen::MatrixXd qm(m_, n_);
    for (int i = 0; i < m_; ++i) {
      const Eigen::ArrayXd gp = dg.row(i).transpose().array().max(0.0);
      const Eigen::ArrayXd gm = (-dg.row(i).transpose().array()).max(0.0);
      const Eigen::ArrayXd pq = 0.001 * (gp + gm) + s_.raa0 * xmamiinv;
      pm.row(i) = ((gp + pq) * ux2).matrix().transpose();
      qm.row(i) = ((gm + pq) * xl2).matrix().transpose();
    }
    const Eigen::VectorXd b =
        pm * (1.0 / ux1).matrix() + qm * (1.0 / xl1).matrix() - g;

    xold2_ = xold1_.size() ? xold1_ : x;
    xold1_ = x;
    x = subsolve(alfa, beta, p0, q0, pm, qm, b);
  }

 private:
  Eigen::VectorXd subsolve(const Eigen::ArrayXd& alfa, const Eigen::ArrayXd& beta, const Eigen::ArrayXd& p0,
                           const Eigen::ArrayXd& q0, const Eigen::MatrixXd& pm, const Eigen::MatrixXd& qm,
                           const Eigen::VectorXd& b) {
    using Eigen::ArrayXd;
    using Eigen::VectorXd;
    const int n = n_;
    const int m = m_;
    const ArrayXd low = low_.array();
    const ArrayXd upp = upp_.array();
    const ArrayXd ca = c_.array();
    const ArrayXd da = d_.array();
    const ArrayXd aa = a_.array();
    const double a0 = s_.a0;
    info_ = MmaStepInfo{};

    ArrayXd x = 0.5 * (alfa + beta);
    ArrayXd y = ArrayXd::Ones(m);
    double z = 1.0;
    ArrayXd lam = ArrayXd::Ones(m);
    ArrayXd xsi = (1.0 / (x - alfa)).max(1.0);
    ArrayXd eta = (1.0 / (beta - x)).max(1.0);
    ArrayXd mu = (0.5 * ca).max(1.0);
    double zet = 1.0;
    ArrayXd s = ArrayXd::Ones(m);

    auto residual = [&](double epsi, double* maxabs) {
      const ArrayXd ux1 = upp - x;
      const ArrayXd xl1 = x - low;
      const ArrayXd plam = p0 + (pm.transpose() * lam.matrix()).array();
      const ArrayXd qlam = q0 + (qm.transpose() * lam.matrix()).array();
      const ArrayXd gvec = (pm * (1.0 / ux1).matrix() + qm * (1.0 / xl1).matrix()).array();
      const ArrayXd dpsidx = plam / ux1.square() - qlam / xl1.square();
      const ArrayXd rex = dpsidx - xsi + eta;
      const ArrayXd rey = ca + da * y - mu - lam;
      const double rez = a0 - zet - (aa * lam).sum();
      const ArrayXd relam = gvec - aa * z - y + s - b.array();
      const ArrayXd rexsi = xsi * (x - alfa) - epsi;
      const ArrayXd reeta = eta * (beta - x) - epsi;
      const ArrayXd remu = mu * y - epsi;
      const double rezet = zet * z - epsi;
      const ArrayXd res = lam * s - epsi;
      double sq = rex.square().sum() + rey.square().sum() + rez * rez + relam.square().sum() +
                  rexsi.square().sum() + reeta.square().sum() + remu.square().sum() + rezet * rezet +
                  res.square().sum();
      if (maxabs) {
        double mx = std::max({std::abs(rez), std::abs(rezet)});
        for (const ArrayXd* r : {&rex, &rey, &relam, &rexsi, &reeta, &remu, &res})
          if (r->size()) mx = std::max(mx, r->abs().maxCoeff());
        *maxabs = mx;
      }
      return std::sqrt(sq);
    };

    double epsi = 1.0;
    while (epsi > s_.epsimin) {
      double residumax = 0.0;
      double residunorm = residual(epsi, &residumax);
      int ittt = 0;
      while (residumax > 0.9 * epsi && ittt < 200) {
        ++ittt;
        ++info_.newton_iterations;
        const ArrayXd ux1 = upp - x;
        const ArrayXd xl1 = x - low;
        const ArrayXd ux2 = ux1.square();
        const ArrayXd xl2 = xl1.square();
        const ArrayXd ux3 = ux1 * ux2;
        const ArrayXd xl3 = xl1 * xl2;
        const ArrayXd plam = p0 + (pm.transpose() * lam.matrix()).array();
        const ArrayXd qlam = q0 + (qm.transpose() * lam.matrix()).array();
        const ArrayXd gvec = (pm * (1.0 / ux1).matrix() + qm * (1.0 / xl1).matrix()).array();
        Eigen::MatrixXd gg(m, n);
        for (int i = 0; i < m; ++i)
          gg.row(i) = (pm.row(i).transpose().array() / ux2 - qm.row(i).transpose().array() / xl2).matrix().transpose();
        const ArrayXd dpsidx = plam / ux2 - qlam / xl2;
        const ArrayXd delx = dpsidx - epsi / (x - alfa) + epsi / (beta - x);
        const ArrayXd dely = ca + da * y - lam - epsi / y;
        const double delz = a0 - (aa * lam).sum() - epsi / z;
        const ArrayXd dellam = gvec - aa * z - y - b.array() + epsi / lam;
        const ArrayXd diagx = 2.0 * (plam / ux3 + qlam / xl3) + xsi / (x - alfa) + eta / (beta - x);
        const ArrayXd diagxinv = 1.0 / diagx;
        const ArrayXd diagy = da + mu / y;
        const ArrayXd diagyinv = 1.0 / diagy;
        const ArrayXd diaglam = s / lam;
        const ArrayXd diaglamyi = diaglam + diagyinv;

        ArrayXd dx;
        ArrayXd dlam;
        double dz = 0.0;
        if (m < n) {
          const VectorXd blam = (dellam + dely / diagy).matrix() - gg * (delx / diagx).matrix();
          Eigen::MatrixXd aam(m + 1, m + 1);
          aam.topLeftCorner(m, m) = gg * diagxinv.matrix().asDiagonal() * gg.transpose();
          aam.topLeftCorner(m, m).diagonal() += diaglamyi.matrix();
          aam.topRightCorner(m, 1) = a_;
          aam.bottomLeftCorner(1, m) = a_.transpose();
          aam(m, m) = -zet / z;
          VectorXd bb(m + 1);
          bb.head(m) = blam;
          bb[m] = delz;
          const VectorXd solut = aam.partialPivLu().solve(bb);
          dlam = solut.head(m).array();
          dz = solut[m];
          dx = -delx / diagx - (gg.transpose() * dlam.matrix()).array() / diagx;
        } else {
          const ArrayXd diaglamyiinv = 1.0 / diaglamyi;
          const ArrayXd dellamyi = dellam + dely / diagy;
          Eigen::MatrixXd axx = gg.transpose() * diaglamyiinv.matrix().asDiagonal() * gg;
          axx.diagonal() += diagx.matrix();
          const VectorXd azz_a = gg.transpose() * (aa / diaglamyi).matrix();
          const double azz = zet / z + (aa * (aa / diaglamyi)).sum();
          Eigen::MatrixXd aam(n + 1, n + 1);
          aam.topLeftCorner(n, n) = axx;
          aam.topRightCorner(n, 1) = azz_a;
          aam.bottomLeftCorner(1, n) = azz_a.transpose();
          aam(n, n) = azz;
          const VectorXd bx = delx.matrix() + gg.transpose() * (dellamyi / diaglamyi).matrix();
          const double bz = delz - (aa * (dellamyi / diaglamyi)).sum();
          VectorXd bb(n + 1);
          bb.head(n) = -bx;
          bb[n] = -bz;
          const VectorXd solut = aam.partialPivLu().solve(bb);
          dx = solut.head(n).array();
          dz = solut[n];
          dlam = (gg * dx.matrix()).array() / diaglamyi - dz * (aa / diaglamyi) + dellamyi / diaglamyi;
        }
        const ArrayXd dy = -dely / diagy + dlam / diagy;
        const ArrayXd dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa);
        const ArrayXd deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x);
        const ArrayXd dmu = -mu + epsi / y - (mu * dy) / y;
        const double dzet = -zet + epsi / z - zet * dz / z;
        const ArrayXd ds = -s + epsi / lam - (s * dlam) / lam;

        double stmxx = std::max(-1.01 * dz / z, -1.01 * dzet / zet);
        auto upd = [&](const ArrayXd& d, const ArrayXd& v) {
          if (d.size()) stmxx = std::max(stmxx, (-1.01 * d / v).maxCoeff());
        };
        upd(dy, y);
        upd(dlam, lam);
        upd(dxsi, xsi);
        upd(deta, eta);
        upd(dmu, mu);
        upd(ds, s);
        const double stmalfa = (-1.01 * dx / (x - alfa)).maxCoeff();
        const double stmbeta = (1.01 * dx / (beta - x)).maxCoeff();
        const double stminv = std::max({stmalfa, stmbeta, stmxx, 1.0});
        double steg = 1.0 / stminv;

        const ArrayXd xold = x, yold = y, lamold = lam, xsiold = xsi, etaold = eta, muold = mu, sold = s;
        const double zold = z, zetold = zet;
        int itto = 0;
        double resinew = 2.0 * residunorm;
        while (resinew > residunorm && itto < 50) {
          ++itto;
          x = xold + steg * dx;
          y = yold + steg * dy;
          z = zold + steg * dz;
          lam = lamold + steg * dlam;
          xsi = xsiold + steg * dxsi;
          eta = etaold + steg * deta;
          mu = muold + steg * dmu;
          zet = zetold + steg * dzet;
          s = sold + steg * ds;
          resinew = residual(epsi, &residumax);
          steg *= 0.5;
        }
        residunorm = resinew;
      }
      info_.residual_norms.push_back(residunorm);
      epsi *= 0.1;
    }
    info_.max_relaxation = m > 0 ? y.maxCoeff() : 0.0;
    info_.multipliers = lam.matrix();
    if (!x.allFinite()) throw NumericalError("mma: subproblem produced non-finite iterate");
    return x.matrix();
  }

  int n_;
  int m_;
  MmaSettings s_;
  Eigen::VectorXd a_;
  Eigen::VectorXd c_;
  Eigen::VectorXd d_;
  int iter_ = 0;
  Eigen::VectorXd low_;
  Eigen::VectorXd upp_;
  Eigen::VectorXd xold1_;
  Eigen::VectorXd xold2_;
  MmaStepInfo info_;
};

}  // namespace pneumo
