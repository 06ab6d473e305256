/* Reference SplitMix64 (Vigna, public domain) used to generate golden vectors.
 * Output lines: "seed epoch draw_index value" with value in hex.
 * Build: cc -O2 -o splitmix64_ref splitmix64_ref.c
 */
#include <stdint.h>
#include <stdio.h>

static uint64_t next(uint64_t *x) {
    uint64_t z = (*x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

static uint64_t mix(uint64_t v) {
    uint64_t x = v;
    return next(&x);
}

int main(void) {
    const uint64_t seeds[] = {0ULL, 1ULL, 42ULL, 7ULL, 0xFFFFFFFFFFFFFFFFULL, 0x0123456789ABCDEFULL};
    const uint64_t epochs[] = {0ULL, 1ULL, 2ULL, 99ULL};
    printf("# seed epoch draw_index value\n");
    /* raw stream from state 0 */
    uint64_t s0 = 0;
    for (int i = 0; i < 4; i++)
        printf("raw 0 %d 0x%016llx\n", i, (unsigned long long)next(&s0));
    for (size_t a = 0; a < sizeof seeds / sizeof *seeds; a++)
        for (size_t e = 0; e < sizeof epochs / sizeof *epochs; e++) {
            uint64_t st = seeds[a] ^ mix(epochs[e]);
            st = mix(st);
            for (int i = 0; i < 5; i++)
                printf("%llu %llu %d 0x%016llx\n", (unsigned long long)seeds[a],
                       (unsigned long long)epochs[e], i, (unsigned long long)next(&st));
        }
    return 0;
}
