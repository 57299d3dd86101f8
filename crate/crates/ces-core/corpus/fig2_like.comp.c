void main() {
  int i;
  double s;
  s = 0.0;
  #pragma omp parallel
  {
    #pragma omp for
    for (i = 0; i < 100; i++) {
      s = s + 1.0;
    }
  }
}
