export class EmptyInputError extends Error {
  constructor(message = "no non-empty sentence lines in input") {
    super(message);
    this.name = "EmptyInputError";
  }
}

export class BadFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "BadFormatError";
  }
}
