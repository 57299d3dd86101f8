void main() {
  int i;
  int a[65536];
  int b[65536];
  #pragma omp parallel
  {
    #pragma omp for
    for (i = 0; i < 65536; i++) {
      b[i] = a[i];
    }
  }
}
