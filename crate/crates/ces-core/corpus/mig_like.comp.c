void main() {
  int k1;
  int k2;
  int k3;
  int va;
  int vb;
  int vc;
  int z;
  int bias;
  bias = 3;
  #pragma omp parallel
  {
    for (k1 = 0; k1 < 120000; k1++) {
      if (bias > 2) {
        va = k1 * 5 + 7;
      } else {
        va = k1;
      }
    }
    for (k2 = 0; k2 < 90000; k2++) {
      vb = k2 * 3 + va;
    }
    for (k3 = 0; k3 < 30000; k3++) {
      vc = k3 * 2 + vb;
    }
    z = va + vb + vc;
  }
}
