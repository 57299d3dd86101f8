void main() {
  int p1;
  int r1;
  int cnt1;
  int k1;
  double out1[1000];
  int p2;
  int r2;
  int cnt2;
  int k2;
  double out2[1000];
  int p3;
  int r3;
  int cnt3;
  int k3;
  double out3[1000];
  int p4;
  int r4;
  int cnt4;
  int k4;
  double out4[1000];
  double tbl[1001];
  #pragma omp parallel
  {
    #pragma omp sections
    {
      #pragma omp section
      {
        cnt1 = 0;
        for (p1 = 3; p1 < 7203; p1 = p1 + 2) {
          r1 = p1 % 641;
          if (r1 == 0) {
            cnt1 = cnt1 + 1;
          }
        }
      }
      #pragma omp section
      {
        for (k1 = 0; k1 < 4000; k1++) {
          out1[k1 % 1000] = tbl[k1 % 1000] + tbl[k1 % 1000 + 1];
        }
      }
      #pragma omp section
      {
        cnt2 = 0;
        for (p2 = 3; p2 < 7203; p2 = p2 + 2) {
          r2 = p2 % 641;
          if (r2 == 0) {
            cnt2 = cnt2 + 1;
          }
        }
      }
      #pragma omp section
      {
        for (k2 = 0; k2 < 4000; k2++) {
          out2[k2 % 1000] = tbl[k2 % 1000] + tbl[k2 % 1000 + 1];
        }
      }
      #pragma omp section
      {
        cnt3 = 0;
        for (p3 = 3; p3 < 7203; p3 = p3 + 2) {
          r3 = p3 % 641;
          if (r3 == 0) {
            cnt3 = cnt3 + 1;
          }
        }
      }
      #pragma omp section
      {
        for (k3 = 0; k3 < 4000; k3++) {
          out3[k3 % 1000] = tbl[k3 % 1000] + tbl[k3 % 1000 + 1];
        }
      }
      #pragma omp section
      {
        cnt4 = 0;
        for (p4 = 3; p4 < 7203; p4 = p4 + 2) {
          r4 = p4 % 641;
          if (r4 == 0) {
            cnt4 = cnt4 + 1;
          }
        }
      }
      #pragma omp section
      {
        for (k4 = 0; k4 < 4000; k4++) {
          out4[k4 % 1000] = tbl[k4 % 1000] + tbl[k4 % 1000 + 1];
        }
      }
    }
  }
}
