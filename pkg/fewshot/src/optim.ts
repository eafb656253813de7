/** AdamW over flat Float64Array parameter blocks. */
export class AdamW {
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(
    private size: number,
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
    private weightDecay = 0.01,
  ) {
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }

  step(params: Float64Array, grads: Float64Array): void {
    this.t += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.t);
    const bc2 = 1 - Math.pow(this.beta2, this.t);
    for (let i = 0; i < this.size; i++) {
      const g = grads[i];
      this.m[i] = this.beta1 * this.m[i] + (1 - this.beta1) * g;
      this.v[i] = this.beta2 * this.v[i] + (1 - this.beta2) * g * g;
      const mHat = this.m[i] / bc1;
      const vHat = this.v[i] / bc2;
      params[i] -=
        this.lr * (mHat / (Math.sqrt(vHat) + this.eps) + this.weightDecay * params[i]);
    }
  }
}
