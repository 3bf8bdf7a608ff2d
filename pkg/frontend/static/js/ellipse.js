/** Confidence-ellipse geometry for a bivariate Gaussian. */
/**
 * The k-sigma ellipse of the Gaussian's covariance
 * [[sx^2, r*sx*sy], [r*sx*sy, sy^2]]: semi-axes are k times the square
 * roots of the eigenvalues, rotated to the major eigenvector.
 */
export function covarianceEllipse(g, k) {
    const a = g.sigmaX * g.sigmaX;
    const c = g.sigmaY * g.sigmaY;
    const b = g.rho * g.sigmaX * g.sigmaY;
    const mean = (a + c) / 2;
    const half = Math.sqrt(((a - c) / 2) ** 2 + b * b);
    const lam1 = mean + half;
    const lam2 = Math.max(mean - half, 0); // guards rho ~ +-1 round-off
    let angle;
    if (b === 0) {
        angle = a >= c ? 0 : 90;
    }
    else {
        angle = (Math.atan2(lam1 - a, b) * 180) / Math.PI;
    }
    return {
        cx: g.muX,
        cy: g.muY,
        rx: k * Math.sqrt(lam1),
        ry: k * Math.sqrt(lam2),
        angleDeg: angle,
    };
}
