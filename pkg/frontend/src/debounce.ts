/** Trailing-edge debounce: a burst of calls collapses into one invocation of
 * the wrapped function, with the last call's arguments, once the burst has
 * been quiet for the full delay. */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  /** Drop any pending invocation. */
  cancel(): void;
  /** Run the pending invocation now, if there is one. */
  flush(): void;
}

export function trailingDebounce<A extends unknown[]>(
  fn: (...args: A) => void,
  delayMs = 150,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | undefined;
  let pending: A | undefined;

  const fire = () => {
    timer = undefined;
    if (pending !== undefined) {
      const args = pending;
      pending = undefined;
      fn(...args);
    }
  };

  const debounced = (...args: A) => {
    pending = args;
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(fire, delayMs);
  };

  debounced.cancel = () => {
    if (timer !== undefined) clearTimeout(timer);
    timer = undefined;
    pending = undefined;
  };

  debounced.flush = () => {
    if (timer !== undefined) clearTimeout(timer);
    fire();
  };

  return debounced;
}
