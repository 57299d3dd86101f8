void main() {
  int t;
  int i;
  int j;
  double acc;
  double a[100];
  for (t = 0; t < 3; t++) {
    #pragma omp parallel
    {
      acc = 0.0;
      #pragma omp for
      for (i = 0; i < 100; i++) {
        for (j = 0; j < 500; j++) {
          acc = acc + a[i] * 0.5;
        }
      }
      acc = acc + 1.0;
    }
  }
}
