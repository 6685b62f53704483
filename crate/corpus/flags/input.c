extern int printf();
extern int atoi();

int opt_upper = 0;
int opt_count = 0;
int opt_verbose = 0;

int parse_flag(int code) {
    if (code == 1) {
        opt_upper = 1;
    }
    if (code == 2) {
        opt_count = 1;
    }
    if (code == 3) {
        opt_verbose = 1;
    }
    return code;
}

int count_items(int n) {
    int c = 0;
    while (n > 0) {
        c = c + 1;
        n = n - 1;
    }
    return c;
}

int shout(int v) {
    return v * 100;
}

int main(int argc) {
    int result = 0;
    parse_flag(2);
    if (opt_count) {
        result = count_items(argc + 4);
    }
    if (opt_upper) {
        result = shout(result);
    }
    if (opt_verbose) {
        printf("verbose\n");
    }
    printf("%d\n", result);
    return 0;
}
