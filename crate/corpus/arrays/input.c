extern int printf();

int data[6] = {4, 8, 15, 16, 23, 42};
int scratch[3];

int sum(int n) {
    int i;
    int s = 0;
    for (i = 0; i < n; i = i + 1) {
        s = s + data[i];
    }
    return s;
}

int main() {
    int k;
    scratch[0] = 1;
    scratch[1] = sum(2);
    k = sum(6);
    printf("%d\n", k);
    printf("%d\n", scratch[1]);
    return 0;
}
