#include <stdio.h>

#include "sage/sage.h"

int main(void) {
  sage_world_params p;
  sage_world* w = NULL;
  sage_trace* t = NULL;
  sage_trace_info info;
  sage_composer_config c;
  uint32_t sel[8];
  size_t n = 0;

  sage_world_params_default(&p);
  if (sage_world_create(&p, &w) != SAGE_OK) return 1;
  if (sage_world_generate(w, 3, 0, &t) != SAGE_OK) return 2;
  if (sage_trace_info_get(t, &info) != SAGE_OK || info.count != 3) return 3;
  sage_composer_config_default(&c);
  c.budget = 8;
  if (sage_compose(t, 1, &c, sel, 8, &n) != SAGE_OK || n != 8) return 4;
  {
    sage_trace* missing = NULL;
    if (sage_trace_load("/nonexistent.sevd", &missing) != SAGE_IO_ERROR) return 5;
  }
  printf("%s ok\n", sage_version());
  sage_trace_free(t);
  sage_world_free(w);
  return 0;
}
