extern int printf();

int used = 5;
int dead1 = 1;
int dead2 = 2;
int written_only = 0;
int table[4] = {1, 2, 3, 4};

int main() {
    int r = used + table[2];
    written_only = r;
    dead2 = dead1 + 1;
    printf("%d\n", r);
    return 0;
}
