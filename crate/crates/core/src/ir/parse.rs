use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;

use super::sexp::{read_all, Pos, Sexp};
use super::*;

type PResult<T> = Result<T, ParseError>;

fn err<T>(pos: Pos, kind: ParseErrorKind) -> PResult<T> {
    Err(ParseError::new(pos, kind))
}

fn atom<'a>(s: &'a Sexp, what: &'static str) -> PResult<&'a str> {
    s.as_atom()
        .ok_or_else(|| ParseError::new(s.pos(), ParseErrorKind::Expected(what)))
}

fn list<'a>(s: &'a Sexp, what: &'static str) -> PResult<&'a [Sexp]> {
    s.as_list()
        .ok_or_else(|| ParseError::new(s.pos(), ParseErrorKind::Expected(what)))
}

const RESERVED: &[&str] = &["this", "true", "false", "null", "void"];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

fn is_class_name(s: &str) -> bool {
    !s.is_empty()
        && s.split('/').all(|part| {
            !part.is_empty()
                && part
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        })
}

/// Class references are checked once every class is known.
struct ClassUse {
    name: ClassName,
    pos: Pos,
}

struct Parser {
    class_uses: Vec<ClassUse>,
}

impl Parser {
    fn class_name(&mut self, s: &Sexp) -> PResult<ClassName> {
        let name = atom(s, "class name")?;
        if !is_class_name(name) || RESERVED.contains(&name) {
            return err(s.pos(), ParseErrorKind::Expected("class name"));
        }
        self.class_uses.push(ClassUse {
            name: name.into(),
            pos: s.pos(),
        });
        Ok(name.into())
    }

    fn ty(&mut self, s: &Sexp, allow_void: bool) -> PResult<Type> {
        let name = atom(s, "type")?;
        Ok(match name {
            "int" => Type::Int,
            "byte" => Type::Byte,
            "char" => Type::Char,
            "boolean" => Type::Boolean,
            "void" if allow_void => Type::Void,
            "void" => return err(s.pos(), ParseErrorKind::VoidType),
            _ => Type::Class(self.class_name(s)?),
        })
    }

    fn register(&self, s: &Sexp) -> PResult<Reg> {
        let name = atom(s, "register")?;
        if !is_identifier(name) || RESERVED.contains(&name) {
            return err(s.pos(), ParseErrorKind::BadRegister(name.to_string()));
        }
        Ok(Reg::new(name))
    }

    fn label(&self, s: &Sexp) -> PResult<Label> {
        let name = atom(s, "label")?;
        Ok(Label::new(name))
    }

    fn aexp(&mut self, s: &Sexp) -> PResult<AExp> {
        match s {
            Sexp::Str(text, _) => Ok(AExp::Str(text.clone())),
            Sexp::Atom(a, pos) => Ok(match a.as_str() {
                "this" => AExp::This,
                "true" => AExp::True,
                "false" => AExp::False,
                "null" => AExp::Null,
                "void" => AExp::Void,
                _ if a.starts_with(|c: char| c.is_ascii_digit() || c == '-') => {
                    let n = a.parse::<i64>().map_err(|_| {
                        ParseError::new(*pos, ParseErrorKind::BadInteger(a.clone()))
                    })?;
                    AExp::Int(n)
                }
                _ => AExp::Name(self.register(s)?),
            }),
            Sexp::List(items, pos) => {
                let head = items
                    .first()
                    .and_then(Sexp::as_atom)
                    .ok_or_else(|| ParseError::new(*pos, ParseErrorKind::Expected("operator")))?;
                if head == "instance-of" {
                    if items.len() != 3 {
                        return err(*pos, ParseErrorKind::Arity(head.to_string()));
                    }
                    let inner = self.aexp(&items[1])?;
                    let class = self.class_name(&items[2])?;
                    return Ok(AExp::InstanceOf(Box::new(inner), class));
                }
                let op = AtomicOp::from_keyword(head).ok_or_else(|| {
                    ParseError::new(*pos, ParseErrorKind::UnknownStatement(head.to_string()))
                })?;
                if items.len() - 1 != op.arity() {
                    return err(*pos, ParseErrorKind::Arity(head.to_string()));
                }
                let args = items[1..]
                    .iter()
                    .map(|a| self.aexp(a))
                    .collect::<PResult<Vec<_>>>()?;
                Ok(AExp::Op(op, args))
            }
        }
    }

    fn cexp(&mut self, items: &[Sexp], pos: Pos) -> PResult<CExp> {
        let head = items[0].as_atom().unwrap_or_default();
        if head == "new" {
            if items.len() != 2 {
                return err(pos, ParseErrorKind::Arity("new".into()));
            }
            return Ok(CExp::New(self.class_name(&items[1])?));
        }
        let kind = InvokeKind::from_keyword(head).ok_or_else(|| {
            ParseError::new(pos, ParseErrorKind::UnknownStatement(head.to_string()))
        })?;
        if items.len() != 4 {
            return err(pos, ParseErrorKind::Arity(head.to_string()));
        }
        let args = list(&items[1], "argument list")?
            .iter()
            .map(|a| self.aexp(a))
            .collect::<PResult<Vec<_>>>()?;
        let arg_types = list(&items[2], "argument type list")?
            .iter()
            .map(|t| self.ty(t, false))
            .collect::<PResult<Vec<_>>>()?;
        let expected = if kind.has_receiver() {
            if args.is_empty() {
                return err(pos, ParseErrorKind::InvokeTypes);
            }
            args.len() - 1
        } else {
            args.len()
        };
        if arg_types.len() != expected {
            return err(pos, ParseErrorKind::InvokeTypes);
        }
        let target = atom(&items[3], "Class.method")?;
        let (class, method) = target
            .rsplit_once('.')
            .filter(|(c, m)| is_class_name(c) && !m.is_empty())
            .ok_or_else(|| {
                ParseError::new(items[3].pos(), ParseErrorKind::Expected("Class.method"))
            })?;
        self.class_uses.push(ClassUse {
            name: class.into(),
            pos: items[3].pos(),
        });
        Ok(CExp::Invoke {
            kind,
            args,
            arg_types,
            class: class.into(),
            method: method.into(),
        })
    }

    fn stmt(&mut self, s: &Sexp) -> PResult<Stmt> {
        let pos = s.pos();
        let items = list(s, "statement")?;
        let head = items
            .first()
            .and_then(Sexp::as_atom)
            .ok_or_else(|| ParseError::new(pos, ParseErrorKind::Expected("statement")))?;
        let arity = |n: usize| -> PResult<()> {
            if items.len() != n + 1 {
                err(pos, ParseErrorKind::Arity(head.to_string()))
            } else {
                Ok(())
            }
        };
        Ok(match head {
            "label" => {
                arity(1)?;
                Stmt::Label(self.label(&items[1])?)
            }
            "nop" => {
                arity(0)?;
                Stmt::Nop
            }
            "line" => {
                arity(1)?;
                let text = atom(&items[1], "line number")?;
                let n: i64 = text.parse().map_err(|_| {
                    ParseError::new(items[1].pos(), ParseErrorKind::BadInteger(text.into()))
                })?;
                if n <= 0 || n > u32::MAX as i64 {
                    return err(items[1].pos(), ParseErrorKind::NonPositiveLine);
                }
                Stmt::Line(n as u32)
            }
            "goto" => {
                arity(1)?;
                Stmt::Goto(self.label(&items[1])?)
            }
            "if" => {
                arity(2)?;
                let cond = self.aexp(&items[1])?;
                let target = list(&items[2], "(goto label)")?;
                if target.len() != 2 || target[0].as_atom() != Some("goto") {
                    return err(items[2].pos(), ParseErrorKind::Expected("(goto label)"));
                }
                Stmt::If(cond, self.label(&target[1])?)
            }
            "assign" => {
                arity(2)?;
                let dest = self.register(&items[1])?;
                if dest.as_str() == "ret" {
                    return err(items[1].pos(), ParseErrorKind::BadRegister("ret".into()));
                }
                match &items[2] {
                    Sexp::List(inner, ipos)
                        if inner.first().and_then(Sexp::as_atom).is_some_and(|h| {
                            h == "new" || InvokeKind::from_keyword(h).is_some()
                        }) =>
                    {
                        Stmt::AssignComplex(dest, self.cexp(inner, *ipos)?)
                    }
                    other => Stmt::AssignAtomic(dest, self.aexp(other)?),
                }
            }
            "field-put" => {
                arity(3)?;
                Stmt::FieldPut {
                    object: self.aexp(&items[1])?,
                    field: FieldName::new(atom(&items[2], "field name")?),
                    value: self.aexp(&items[3])?,
                }
            }
            "field-get" => {
                arity(3)?;
                Stmt::FieldGet {
                    dest: self.register(&items[1])?,
                    object: self.aexp(&items[2])?,
                    field: FieldName::new(atom(&items[3], "field name")?),
                }
            }
            "push-handler" => {
                arity(2)?;
                Stmt::PushHandler(self.class_name(&items[1])?, self.label(&items[2])?)
            }
            "pop-handler" => {
                arity(0)?;
                Stmt::PopHandler
            }
            "throw" => {
                arity(1)?;
                Stmt::Throw(self.aexp(&items[1])?)
            }
            "return" => match items.len() {
                1 => Stmt::Return(AExp::Void),
                2 => Stmt::Return(self.aexp(&items[1])?),
                _ => return err(pos, ParseErrorKind::Arity("return".into())),
            },
            other => return err(pos, ParseErrorKind::UnknownStatement(other.to_string())),
        })
    }

    /// Leading attribute keywords, returning the index of the first non-attribute.
    fn attributes(&self, items: &[Sexp], from: usize) -> (BTreeSet<Attribute>, usize) {
        let mut attrs = BTreeSet::new();
        let mut i = from;
        while let Some(a) = items
            .get(i)
            .and_then(Sexp::as_atom)
            .and_then(Attribute::from_keyword)
        {
            attrs.insert(a);
            i += 1;
        }
        (attrs, i)
    }

    fn field(&mut self, s: &Sexp) -> PResult<FieldDef> {
        let items = list(s, "(field ...)")?;
        if s.head() != Some("field") {
            return err(s.pos(), ParseErrorKind::Expected("(field ...)"));
        }
        let (attributes, i) = self.attributes(items, 1);
        if items.len() != i + 2 {
            return err(s.pos(), ParseErrorKind::Arity("field".into()));
        }
        let name = atom(&items[i], "field name")?;
        if !is_identifier(name) {
            return err(items[i].pos(), ParseErrorKind::Expected("field name"));
        }
        Ok(FieldDef {
            attributes,
            name: FieldName::new(name),
            ty: self.ty(&items[i + 1], false)?,
        })
    }

    fn method(&mut self, s: &Sexp) -> PResult<MethodDef> {
        let items = list(s, "(method ...)")?;
        if s.head() != Some("method") {
            return err(s.pos(), ParseErrorKind::Expected("(method ...)"));
        }
        let (attributes, mut i) = self.attributes(items, 1);
        if items.len() < i + 3 {
            return err(s.pos(), ParseErrorKind::Arity("method".into()));
        }
        let name = atom(&items[i], "method name")?;
        if name.is_empty() || name.contains(['.', '(', ')']) {
            return err(items[i].pos(), ParseErrorKind::Expected("method name"));
        }
        let params = list(&items[i + 1], "parameter types")?
            .iter()
            .map(|t| self.ty(t, false))
            .collect::<PResult<Vec<_>>>()?;
        let ret = self.ty(&items[i + 2], true)?;
        i += 3;
        let mut throws = Vec::new();
        if items.get(i).and_then(Sexp::head) == Some("throws") {
            for c in &items[i].as_list().unwrap_or_default()[1..] {
                throws.push(self.class_name(c)?);
            }
            i += 1;
        }
        let mut limit = params.len() as u32;
        if let Some(l) = items.get(i).filter(|l| l.head() == Some("limit")) {
            let parts = l.as_list().unwrap_or_default();
            if parts.len() != 2 {
                return err(l.pos(), ParseErrorKind::Arity("limit".into()));
            }
            let text = atom(&parts[1], "register limit")?;
            limit = text.parse().map_err(|_| {
                ParseError::new(parts[1].pos(), ParseErrorKind::BadInteger(text.into()))
            })?;
            if (limit as usize) < params.len() {
                return err(
                    l.pos(),
                    ParseErrorKind::LimitTooSmall {
                        limit,
                        params: params.len(),
                    },
                );
            }
            i += 1;
        }
        let mut body = Vec::new();
        let mut positions = Vec::new();
        for st in &items[i..] {
            body.push(self.stmt(st)?);
            positions.push(st.pos());
        }
        let method = MethodDef {
            attributes,
            name: MethodName::new(name),
            params,
            ret,
            throws,
            limit,
            body,
            positions,
        };
        if method.body.is_empty() && !method.is_abstract() {
            return err(s.pos(), ParseErrorKind::EmptyBody(name.to_string()));
        }
        check_labels(&method)?;
        Ok(method)
    }

    fn class(&mut self, s: &Sexp) -> PResult<(ClassDef, Pos)> {
        let items = list(s, "class definition")?;
        let (attributes, i) = self.attributes(items, 0);
        if items.get(i).and_then(Sexp::as_atom) != Some("class")
            || items.get(i + 2).and_then(Sexp::as_atom) != Some("extends")
        {
            return err(
                s.pos(),
                ParseErrorKind::Expected("(... class NAME extends SUPER (fields) (methods))"),
            );
        }
        if items.len() != i + 6 {
            return err(s.pos(), ParseErrorKind::Arity("class".into()));
        }
        let name_sexp = &items[i + 1];
        let name = atom(name_sexp, "class name")?;
        if !is_class_name(name) {
            return err(name_sexp.pos(), ParseErrorKind::Expected("class name"));
        }
        if is_builtin_class(name) {
            return err(
                name_sexp.pos(),
                ParseErrorKind::BuiltinRedeclared(name.to_string()),
            );
        }
        let super_name = self.class_name(&items[i + 3])?;
        let mut fields = Vec::new();
        let mut seen = BTreeSet::new();
        for f in list(&items[i + 4], "field list")? {
            let field = self.field(f)?;
            if !seen.insert(field.name.clone()) {
                return err(f.pos(), ParseErrorKind::DuplicateField(field.name.0));
            }
            fields.push(field);
        }
        let mut methods = Vec::new();
        let mut seen = BTreeSet::new();
        for m in list(&items[i + 5], "method list")? {
            let method = self.method(m)?;
            if !seen.insert((method.name.clone(), method.params.clone())) {
                return err(m.pos(), ParseErrorKind::DuplicateMethod(method.name.0));
            }
            methods.push(method);
        }
        Ok((
            ClassDef {
                attributes,
                name: name.into(),
                super_name,
                fields,
                methods,
            },
            name_sexp.pos(),
        ))
    }
}

fn check_labels(m: &MethodDef) -> PResult<()> {
    let mut labels = BTreeSet::new();
    for (s, pos) in m.body.iter().zip(&m.positions) {
        if let Stmt::Label(l) = s {
            if !labels.insert(l) {
                return err(*pos, ParseErrorKind::DuplicateLabel(l.0.clone()));
            }
        }
    }
    for (s, pos) in m.body.iter().zip(&m.positions) {
        let target = match s {
            Stmt::Goto(l) | Stmt::If(_, l) | Stmt::PushHandler(_, l) => l,
            _ => continue,
        };
        if !labels.contains(target) {
            return err(*pos, ParseErrorKind::DanglingLabel(target.0.clone()));
        }
    }
    Ok(())
}

/// Parses and validates a whole program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let forms = read_all(text)?;
    let mut parser = Parser {
        class_uses: Vec::new(),
    };
    let mut classes = Vec::new();
    let mut positions: BTreeMap<ClassName, Pos> = BTreeMap::new();
    for form in &forms {
        let (class, pos) = parser.class(form)?;
        if positions.insert(class.name.clone(), pos).is_some() {
            return err(pos, ParseErrorKind::DuplicateClass(class.name.0));
        }
        classes.push(class);
    }
    for u in &parser.class_uses {
        if !positions.contains_key(&u.name) && !is_builtin_class(u.name.as_str()) {
            return err(u.pos, ParseErrorKind::UndeclaredClass(u.name.0.clone()));
        }
    }
    let supers: BTreeMap<&ClassName, &ClassName> =
        classes.iter().map(|c| (&c.name, &c.super_name)).collect();
    for c in &classes {
        let mut cur = &c.super_name;
        let mut steps = 0;
        while let Some(next) = supers.get(cur) {
            if *cur == c.name || steps > classes.len() {
                return err(
                    positions[&c.name],
                    ParseErrorKind::HierarchyCycle(c.name.0.clone()),
                );
            }
            cur = next;
            steps += 1;
        }
        if *cur == c.name {
            return err(
                positions[&c.name],
                ParseErrorKind::HierarchyCycle(c.name.0.clone()),
            );
        }
    }
    Ok(Program::from_classes(classes))
}
