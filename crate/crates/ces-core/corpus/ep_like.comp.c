void main() {
  int i;
  int j;
  double acc;
  double xs[8192];
  #pragma omp parallel
  {
    #pragma omp for
    for (i = 0; i < 8192; i++) {
      for (j = 0; j < 256; j++) {
        acc = acc + xs[i] * xs[i] + xs[i] * 0.5;
      }
    }
  }
}
