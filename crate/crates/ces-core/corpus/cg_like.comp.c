void main() {
  int it;
  int i;
  double d;
  double x[20000];
  double y[20000];
  d = 2.5;
  for (it = 0; it < 4; it++) {
    #pragma omp parallel
    {
      #pragma omp for
      for (i = 0; i < 20000; i++) {
        y[i] = x[i] * d;
      }
    }
  }
}
